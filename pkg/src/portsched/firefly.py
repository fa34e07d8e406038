"""Firefly-style global search over the candidate-pool recombination space.

Each flexible portcall contributes one dimension whose values are the distinct
(berth, start) assignments it takes across the candidate pool. Recombining
dimensions reaches schedules the pool itself never contained. Fireflies move
by attraction toward the current brightest plus Gaussian wandering scaled by
the pool size; the best schedule ever decoded is tracked elitistically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .engine import EvalContext, OccupancyBlock
from .errors import ParameterError
from .model import (Berth, NormalizationContext, ObjectiveWeights, Portcall,
                    Schedule)
from .swarm import CandidatePool

__all__ = [
    "FireflyHyper",
    "StopCriteria",
    "SearchSpace",
    "build_search_space",
    "move_firefly",
    "run_firefly",
]


@dataclass(frozen=True)
class FireflyHyper:
    """Movement coefficients; defaults are full-strength large-region wandering.

    delta_b None takes the pool size as the maximum boundary difference;
    population None scales with the number of distinct vessels.
    """

    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    s: int = 1
    population: Optional[int] = 30
    delta_b: Optional[int] = None

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ParameterError("alpha must lie in (0, 1]")
        if not 0.0 <= self.beta <= 1.0:
            raise ParameterError("beta must lie in [0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ParameterError("gamma must lie in [0, 1]")
        if self.s not in (0, 1):
            raise ParameterError("s must be 0 (small region) or 1 (large region)")


@dataclass(frozen=True)
class StopCriteria:
    max_evals: int = 20000
    stall_limit: int = 50


@dataclass(frozen=True)
class SearchSpace:
    """Per-flexible-portcall candidate assignment lists drawn from the pool."""

    portcall_ids: tuple[str, ...]
    candidates: tuple[tuple[tuple[str, int], ...], ...]

    @property
    def dim_sizes(self) -> np.ndarray:
        return np.array([len(c) for c in self.candidates], dtype=int)


def build_search_space(pool: CandidatePool,
                       portcalls: Sequence[Portcall]) -> SearchSpace:
    """Distinct (berth, start) values per flexible portcall, in pool order."""
    if not len(pool):
        raise ParameterError("candidate pool is empty")
    flexible = [pc for pc in portcalls if not pc.is_fixed]
    ids = tuple(pc.portcall_id for pc in flexible)
    entry_maps = [entry.schedule.by_portcall() for entry in pool.entries]
    per_dim: list[tuple[tuple[str, int], ...]] = []
    for pid in ids:
        seen: dict[tuple[str, int], None] = {}
        for m in entry_maps:
            a = m[pid]
            seen.setdefault((a.berth_id, a.berth_start))
        per_dim.append(tuple(seen))
    return SearchSpace(ids, tuple(per_dim))


def move_firefly(x_i: np.ndarray, intensity_i: float, x_max: np.ndarray,
                 intensity_max: float, dim_sizes: np.ndarray,
                 hyper: FireflyHyper, rng: np.random.Generator,
                 delta_b: int) -> np.ndarray:
    """One movement step, rounded and clamped back into the index lattice.

    Dimmer fireflies move toward the brightest plus noise; the brightest one
    only wanders. With s=1 the per-component Gaussian noise is scaled by the
    boundary difference delta_b, with s=0 it stays unit-scale.
    """
    eps = rng.standard_normal(x_i.shape[0])
    scale = hyper.beta * ((delta_b - 1) * hyper.s + 1)
    if intensity_i < intensity_max:
        new = x_i + hyper.alpha * hyper.gamma * (x_max - x_i) + scale * eps
    else:
        new = x_i + scale * eps
    return np.clip(np.rint(new), 0, dim_sizes - 1).astype(int)


def _evaluate_position(ctx: EvalContext, space: SearchSpace,
                       x: np.ndarray) -> tuple[float, list[str], list[int]]:
    berth_ids = []
    desired = []
    for j, idx in enumerate(x):
        berth_id, start = space.candidates[j][int(idx)]
        berth_ids.append(berth_id)
        desired.append(start)
    j_value, starts = ctx.evaluate(berth_ids, desired)
    return j_value, berth_ids, starts


def run_firefly(pool: CandidatePool, portcalls: Sequence[Portcall],
                berths: Sequence[Berth], baseline: Schedule,
                weights: ObjectiveWeights, hyper: FireflyHyper,
                stop: StopCriteria, seed: int,
                occupancy: Sequence[OccupancyBlock] = (),
                norm: Optional[NormalizationContext] = None) -> Schedule:
    """Global search over the pool's recombination space; returns the best schedule.

    The population is initialized uniformly over the search space plus one
    firefly at the pool's best entry, so the result is never worse than the
    pool. Stops at max_evals objective evaluations or after stall_limit
    iterations without improvement. Deterministic per seed.
    """
    space = build_search_space(pool, portcalls)
    dim_sizes = space.dim_sizes
    if len(space.portcall_ids) == 0 or int(dim_sizes.max(initial=1)) == 1:
        return pool.best.schedule
    ctx = EvalContext(portcalls, berths, baseline, weights, norm=norm,
                      occupancy=occupancy)
    delta_b = hyper.delta_b if hyper.delta_b is not None else len(pool)
    population = hyper.population
    if population is None:
        population = max(2, len({pc.vessel_id for pc in portcalls}))
    rng = np.random.default_rng(seed)

    positions = np.zeros((population + 1, len(dim_sizes)), dtype=int)
    positions[1:] = rng.integers(0, dim_sizes, size=(population, len(dim_sizes)))
    intensities = np.empty(population + 1)
    best_j = np.inf
    best_decoded: tuple[list[str], list[int]] = ([], [])
    evals = 0
    for i in range(population + 1):
        j_value, berth_ids, starts = _evaluate_position(ctx, space, positions[i])
        intensities[i] = -j_value
        evals += 1
        if j_value < best_j:
            best_j = j_value
            best_decoded = (berth_ids, starts)

    stall = 0
    while evals < stop.max_evals and stall < stop.stall_limit:
        improved = False
        for i in range(population + 1):
            if evals >= stop.max_evals:
                break
            brightest = int(np.argmax(intensities))
            x_max = positions[brightest].copy()
            positions[i] = move_firefly(positions[i], float(intensities[i]),
                                        x_max, float(intensities[brightest]),
                                        dim_sizes, hyper, rng, delta_b)
            j_value, berth_ids, starts = _evaluate_position(ctx, space, positions[i])
            intensities[i] = -j_value
            evals += 1
            if j_value < best_j:
                best_j = j_value
                best_decoded = (berth_ids, starts)
                improved = True
        stall = 0 if improved else stall + 1

    return ctx.materialize(*best_decoded)
