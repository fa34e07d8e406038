"""Particle-swarm sampling stage: builds the pool of candidate schedules.

The swarm searches a real-valued relaxation of the assignment space (one
berth-choice dimension and one start-slot dimension per flexible portcall).
Positions are rounded into valid index ranges at decode time and repaired to
per-berth feasibility, so every candidate entering the pool is feasible. Each
iteration's incumbent best is snapshotted into the pool.
"""

from __future__ import annotations

import math
import random
from bisect import insort
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .engine import EvalContext, OccupancyBlock, place_interval
from .errors import ParameterError
from .model import (Assignment, Berth, NormalizationContext, ObjectiveWeights,
                    Portcall, Schedule)

__all__ = [
    "ConstraintSpec",
    "SwarmHyper",
    "PoolEntry",
    "CandidatePool",
    "init_constraints",
    "apply_constraints",
    "encode_baseline",
    "decode",
    "repair",
    "run_swarm",
]


@dataclass(frozen=True)
class ConstraintSpec:
    """Which portcalls are frozen and which may spill to buffer berths."""

    fixed_ids: frozenset[str]
    buffer_eligible_ids: frozenset[str]
    fixed_ratio: float
    randomness_ratio: float


@dataclass(frozen=True)
class SwarmHyper:
    """Swarm settings; max_iter doubles as the candidate-pool size.

    swarm_size None scales the swarm to the number of distinct vessels.
    """

    max_iter: int = 100
    swarm_size: Optional[int] = 40
    inertia: float = 0.72
    c_local: float = 1.49
    c_global: float = 1.49
    slot_minutes: int = 15
    max_slots: int = 1344


@dataclass(frozen=True)
class PoolEntry:
    schedule: Schedule
    objective: float


@dataclass(frozen=True)
class CandidatePool:
    """Feasible candidate schedules, deduplicated, ascending by objective."""

    entries: tuple[PoolEntry, ...]

    @property
    def best(self) -> PoolEntry:
        return self.entries[0]

    def __len__(self) -> int:
        return len(self.entries)


def _ceil_count(ratio: float, n: int) -> int:
    return min(n, max(0, math.ceil(ratio * n - 1e-9)))


def init_constraints(portcalls: Sequence[Portcall], fixed_ratio: float,
                     randomness_ratio: float, seed: int) -> ConstraintSpec:
    """Sample the fixed and buffer-eligible portcall sets for one run.

    ceil(fixed_ratio * N) portcalls are locked to their baseline pairing; of
    the remainder, ceil(randomness_ratio * flexible) may also use buffer
    berths. Ratios up to 1.0 are accepted (1.0 is the degenerate all-fixed /
    all-eligible test mode; scenario-faithful values stay within [0, 0.9]).
    """
    for name, value in (("fixed_ratio", fixed_ratio),
                        ("randomness_ratio", randomness_ratio)):
        if not 0.0 <= value <= 1.0:
            raise ParameterError(f"{name} must lie in [0, 1], got {value}")
    ids = sorted(pc.portcall_id for pc in portcalls)
    rng = random.Random(seed)
    n_fixed = _ceil_count(fixed_ratio, len(ids))
    fixed = frozenset(rng.sample(ids, n_fixed))
    remainder = [p for p in ids if p not in fixed]
    n_eligible = _ceil_count(randomness_ratio, len(remainder))
    eligible = frozenset(rng.sample(remainder, n_eligible))
    return ConstraintSpec(fixed, eligible, fixed_ratio, randomness_ratio)


def apply_constraints(portcalls: Sequence[Portcall],
                      con: ConstraintSpec) -> list[Portcall]:
    """Fresh portcall copies with the sampled constraint flags written on."""
    return [replace(pc,
                    is_fixed=pc.portcall_id in con.fixed_ids,
                    is_buffer_eligible=pc.portcall_id in con.buffer_eligible_ids)
            for pc in portcalls]


def _check_marked(portcalls: Sequence[Portcall], con: ConstraintSpec):
    for pc in portcalls:
        if pc.is_fixed != (pc.portcall_id in con.fixed_ids) or \
                pc.is_buffer_eligible != (pc.portcall_id in con.buffer_eligible_ids):
            raise ParameterError(
                f"portcall {pc.portcall_id} flags disagree with the constraint spec; "
                "run apply_constraints first")


def encode_baseline(ctx: EvalContext) -> np.ndarray:
    """Position whose decode reproduces the baseline for left-justified baselines.

    Berth index 0 is always the requested berth; the slot is the floor of the
    baseline start offset, which the repair pass pushes back onto the exact
    baseline start when the baseline has no avoidable idle gaps.
    """
    pos = np.zeros(2 * ctx.n_flexible)
    for j, pc in enumerate(ctx.flexible):
        a = ctx.baseline_assignments[pc.portcall_id]
        offset = a.berth_start - pc.arrival_time
        pos[2 * j + 1] = min(offset // ctx.slot_minutes, ctx.max_slots - 1)
    return pos


def _decode_arrays(ctx: EvalContext, position: np.ndarray) -> tuple[list[str], list[int]]:
    berth_ids = []
    desired = []
    for j in range(ctx.n_flexible):
        allowed = ctx.flex_allowed[j]
        b = int(round(float(position[2 * j])))
        b = min(max(b, 0), len(allowed) - 1)
        slot = int(round(float(position[2 * j + 1])))
        slot = min(max(slot, 0), ctx.max_slots - 1)
        berth_ids.append(allowed[b])
        desired.append(ctx.flex_arrival[j] + slot * ctx.slot_minutes)
    return berth_ids, desired


def decode(position: Sequence[float], con: ConstraintSpec,
           portcalls: Sequence[Portcall], berths: Sequence[Berth],
           baseline: Schedule, hyper: SwarmHyper = SwarmHyper(),
           occupancy: Sequence[OccupancyBlock] = ()) -> Schedule:
    """Map a particle position onto a feasible schedule.

    Fixed portcalls copy their baseline assignment; each flexible portcall's
    two components select a berth from its allowed list and a start slot after
    arrival, then conflicts are repaired.
    """
    marked = apply_constraints(portcalls, con)
    ctx = EvalContext(marked, berths, baseline, ObjectiveWeights(0.0, 1.0),
                      occupancy=occupancy, slot_minutes=hyper.slot_minutes,
                      max_slots=hyper.max_slots)
    position = np.asarray(position, dtype=float)
    if position.shape != (2 * ctx.n_flexible,):
        raise ParameterError(
            f"position must have {2 * ctx.n_flexible} components, got {position.shape}")
    berth_ids, desired = _decode_arrays(ctx, position)
    starts = ctx.repair_starts(berth_ids, desired)
    return ctx.materialize(berth_ids, starts)


def repair(s: Schedule, portcalls: Sequence[Portcall],
           occupancy: Sequence[OccupancyBlock] = ()) -> Schedule:
    """Restore per-berth non-overlap among flexible assignments.

    Fixed assignments (and injected occupancy blocks) are immovable; flexible
    assignments are processed in (berth, start, portcall_id) order and each
    conflicting one moves to the earliest free start at or after its arrival.
    Idempotent: a feasible schedule comes back unchanged.
    """
    by_pc = {pc.portcall_id: pc for pc in portcalls}
    committed: dict[str, list[tuple[int, int]]] = {}
    for berth_id, start, end in occupancy:
        committed.setdefault(berth_id, []).append((start, end))
    flexible = []
    for a in s.assignments:
        pc = by_pc[a.portcall_id]
        if pc.is_fixed:
            committed.setdefault(a.berth_id, []).append(
                (a.berth_start, a.berth_start + pc.service_duration))
        else:
            flexible.append((a, pc))
    for spans in committed.values():
        spans.sort()
    placed: dict[str, int] = {}
    for a, pc in sorted(flexible, key=lambda t: (t[0].berth_id, t[0].berth_start,
                                                 t[0].portcall_id)):
        spans = committed.setdefault(a.berth_id, [])
        t = place_interval(spans, a.berth_start, pc.service_duration, pc.arrival_time)
        insort(spans, (t, t + pc.service_duration))
        placed[a.portcall_id] = t
    assignments = tuple(
        a if by_pc[a.portcall_id].is_fixed
        else Assignment(a.portcall_id, a.berth_id, placed[a.portcall_id])
        for a in s.assignments)
    return Schedule(assignments)


def run_swarm(portcalls: Sequence[Portcall], berths: Sequence[Berth],
              baseline: Schedule, con: ConstraintSpec, hyper: SwarmHyper,
              weights: ObjectiveWeights, seed: int,
              occupancy: Sequence[OccupancyBlock] = (),
              norm: Optional[NormalizationContext] = None) -> CandidatePool:
    """Swarm search that accumulates per-iteration incumbents into a pool.

    The baseline enters both as a pool entry and as one seeded particle, so
    the pool never reports worse than history. Deterministic per seed.
    """
    _check_marked(portcalls, con)
    ctx = EvalContext(portcalls, berths, baseline, weights, norm=norm,
                      occupancy=occupancy, slot_minutes=hyper.slot_minutes,
                      max_slots=hyper.max_slots)
    pool: dict[tuple, tuple[list[str], list[int], float]] = {}

    def pool_insert(berth_ids, starts, j_value):
        key = tuple(zip(berth_ids, starts))
        if key not in pool:
            pool[key] = (list(berth_ids), list(starts), j_value)

    base_ids, base_starts = ctx.baseline_candidate()
    base_j, base_repaired = ctx.evaluate(base_ids, base_starts)
    pool_insert(base_ids, base_repaired, base_j)

    if ctx.n_flexible == 0:
        return _finalize(ctx, pool, hyper.max_iter)

    n = hyper.swarm_size
    if n is None:
        n = max(2, len({pc.vessel_id for pc in portcalls}))
    if n < 2:
        raise ParameterError("swarm_size must be >= 2")
    d = 2 * ctx.n_flexible
    hi = np.empty(d)
    for j in range(ctx.n_flexible):
        hi[2 * j] = len(ctx.flex_allowed[j]) - 1
        hi[2 * j + 1] = hyper.max_slots - 1
    v_max = np.maximum(hi, 1.0)

    rng = np.random.default_rng(seed)
    positions = rng.uniform(0.0, 1.0, size=(n, d)) * hi
    positions[0] = encode_baseline(ctx)
    velocities = np.zeros((n, d))

    local_best = positions.copy()
    local_j = np.empty(n)
    decoded: list[tuple[list[str], list[int]]] = [([], [])] * n
    for i in range(n):
        berth_ids, desired = _decode_arrays(ctx, positions[i])
        j_value, starts = ctx.evaluate(berth_ids, desired)
        local_j[i] = j_value
        decoded[i] = (berth_ids, starts)
    g = int(np.argmin(local_j))
    global_best = local_best[g].copy()
    global_j = float(local_j[g])
    global_decoded = decoded[g]

    for _ in range(hyper.max_iter):
        r1 = rng.random((n, d))
        r2 = rng.random((n, d))
        velocities = (hyper.inertia * velocities
                      + hyper.c_local * r1 * (local_best - positions)
                      + hyper.c_global * r2 * (global_best - positions))
        np.clip(velocities, -v_max, v_max, out=velocities)
        positions += velocities
        for i in range(n):
            berth_ids, desired = _decode_arrays(ctx, positions[i])
            j_value, starts = ctx.evaluate(berth_ids, desired)
            if j_value < local_j[i]:
                local_j[i] = j_value
                local_best[i] = positions[i].copy()
                if j_value < global_j:
                    global_j = j_value
                    global_best = positions[i].copy()
                    global_decoded = (berth_ids, starts)
        pool_insert(global_decoded[0], global_decoded[1], global_j)

    return _finalize(ctx, pool, hyper.max_iter)


def _finalize(ctx: EvalContext, pool: dict, max_entries: int) -> CandidatePool:
    ranked = sorted(pool.values(), key=lambda e: (e[2], tuple(zip(e[0], e[1]))))
    ranked = ranked[:max_entries]
    entries = tuple(PoolEntry(ctx.materialize(berth_ids, starts), j_value)
                    for berth_ids, starts, j_value in ranked)
    return CandidatePool(entries)
