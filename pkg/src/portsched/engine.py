"""Internal decode/repair/evaluate machinery shared by both optimizers.

An EvalContext pre-indexes one optimization window: flexible portcalls with
their allowed berths, the immovable occupancy (fixed pairs plus blocks handed
in from other windows) and the fixed portcalls' KPI contribution. Candidate
positions are evaluated against it without materializing Schedule objects.
"""

from __future__ import annotations

from bisect import bisect_left, insort
from typing import Optional, Sequence

from .errors import ParameterError
from .model import (Assignment, Berth, NormalizationContext, ObjectiveWeights,
                    Portcall, Schedule, allowed_berths, kpi_report,
                    weighted_objective)

# (berth_id, start, end) blocks injected from outside the current window.
OccupancyBlock = tuple[str, int, int]


def safe_normalization(baseline: Schedule, portcalls: Sequence[Portcall],
                       weights: ObjectiveWeights) -> NormalizationContext:
    """Baseline-average references with a guard for zero-wait windows.

    A window whose baseline has zero average wait cannot normalize the wait
    term; a unit reference keeps the term defined (and purely penalizing)
    without changing which schedule minimizes it.
    """
    report = kpi_report(baseline, portcalls)
    ref_wait = report.avg_wait
    if weights.w_wait != 0.0 and ref_wait <= 0.0:
        ref_wait = 1.0
    return NormalizationContext(ref_wait=ref_wait, ref_turn=report.avg_turnaround)


def place_interval(committed: list[tuple[int, int]], desired: int,
                   duration: int, earliest: int) -> int:
    """Start time for one interval against a disjoint, start-sorted block list.

    Keeps the desired start when it fits; otherwise the earliest
    non-overlapping start at or after `earliest`. Does not mutate committed.
    """
    hi = bisect_left(committed, (desired + duration,))
    conflict = hi > 0 and committed[hi - 1][1] > desired
    if not conflict:
        return desired
    t = earliest
    lo = bisect_left(committed, (earliest,))
    if lo > 0 and committed[lo - 1][1] > earliest:
        lo -= 1
    for k in range(lo, len(committed)):
        s, e = committed[k]
        if t + duration <= s:
            break
        if e > t:
            t = e
    return t


class EvalContext:
    """Pre-indexed evaluation state for one optimization window."""

    def __init__(self, portcalls: Sequence[Portcall], berths: Sequence[Berth],
                 baseline: Schedule, weights: ObjectiveWeights,
                 norm: Optional[NormalizationContext] = None,
                 occupancy: Sequence[OccupancyBlock] = (),
                 slot_minutes: int = 15, max_slots: int = 1344):
        if not portcalls:
            raise ParameterError("evaluation context needs at least one portcall")
        self.portcalls = list(portcalls)
        self.berths = list(berths)
        self.weights = weights
        self.slot_minutes = slot_minutes
        self.max_slots = max_slots
        base_by_pc = baseline.by_portcall()
        self.baseline_assignments = {pc.portcall_id: base_by_pc[pc.portcall_id]
                                     for pc in self.portcalls}
        self.norm = norm if norm is not None else safe_normalization(
            baseline, self.portcalls, weights)

        self.flexible: list[Portcall] = [pc for pc in self.portcalls if not pc.is_fixed]
        self.flex_arrival = [pc.arrival_time for pc in self.flexible]
        self.flex_service = [pc.service_duration for pc in self.flexible]
        self.flex_allowed = [allowed_berths(pc, berths) for pc in self.flexible]

        self.fixed_wait_sum = 0
        self.fixed_turn_sum = 0
        blocked: dict[str, list[tuple[int, int]]] = {}
        for pc in self.portcalls:
            if not pc.is_fixed:
                continue
            a = self.baseline_assignments[pc.portcall_id]
            wait = a.berth_start - pc.arrival_time
            self.fixed_wait_sum += wait
            self.fixed_turn_sum += wait + pc.service_duration
            blocked.setdefault(a.berth_id, []).append(
                (a.berth_start, a.berth_start + pc.service_duration))
        for berth_id, start, end in occupancy:
            blocked.setdefault(berth_id, []).append((start, end))
        for spans in blocked.values():
            spans.sort()
        self.blocked = blocked
        self.n_total = len(self.portcalls)

    @property
    def n_flexible(self) -> int:
        return len(self.flexible)

    def repair_starts(self, berth_ids: Sequence[str],
                      desired: Sequence[int]) -> list[int]:
        """Resolve per-berth conflicts among the flexible assignments.

        Flexible assignments are processed in (berth, desired start,
        portcall_id) order; a conflicting one moves to the earliest free start
        at or after its arrival on its chosen berth. Idempotent.
        """
        order = sorted(range(len(self.flexible)),
                       key=lambda j: (berth_ids[j], desired[j],
                                      self.flexible[j].portcall_id))
        committed: dict[str, list[tuple[int, int]]] = {}
        starts = [0] * len(self.flexible)
        for j in order:
            berth = berth_ids[j]
            spans = committed.get(berth)
            if spans is None:
                spans = list(self.blocked.get(berth, ()))
                committed[berth] = spans
            svc = self.flex_service[j]
            t = place_interval(spans, desired[j], svc, self.flex_arrival[j])
            insort(spans, (t, t + svc))
            starts[j] = t
        return starts

    def evaluate(self, berth_ids: Sequence[str],
                 desired: Sequence[int]) -> tuple[float, list[int]]:
        """Objective value and repaired starts for one candidate."""
        starts = self.repair_starts(berth_ids, desired)
        total_wait = self.fixed_wait_sum
        total_turn = self.fixed_turn_sum
        for j, start in enumerate(starts):
            wait = start - self.flex_arrival[j]
            total_wait += wait
            total_turn += wait + self.flex_service[j]
        j_value = weighted_objective(total_wait, total_turn, self.n_total,
                                     self.weights, self.norm)
        return j_value, starts

    def materialize(self, berth_ids: Sequence[str],
                    starts: Sequence[int]) -> Schedule:
        """Full Schedule in dataset portcall order (fixed pairs from baseline)."""
        flex_pos = {pc.portcall_id: j for j, pc in enumerate(self.flexible)}
        assignments = []
        for pc in self.portcalls:
            if pc.is_fixed:
                a = self.baseline_assignments[pc.portcall_id]
                assignments.append(Assignment(pc.portcall_id, a.berth_id, a.berth_start))
            else:
                j = flex_pos[pc.portcall_id]
                assignments.append(Assignment(pc.portcall_id, berth_ids[j], starts[j]))
        return Schedule(tuple(assignments))

    def baseline_candidate(self) -> tuple[list[str], list[int]]:
        """The baseline's (berth, start) choices for the flexible portcalls."""
        berth_ids = []
        starts = []
        for pc in self.flexible:
            a = self.baseline_assignments[pc.portcall_id]
            berth_ids.append(a.berth_id)
            starts.append(a.berth_start)
        return berth_ids, starts
