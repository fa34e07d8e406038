"""Domain model for vessel-berth scheduling.

Types for berths, portcalls, assignments and schedules, plus the operations
built on them: wait/turnaround KPIs, the weighted normalized objective,
feasibility checking and the FCFS baseline constructor. All times are integer
epoch minutes (UTC); durations are integer minutes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .errors import DataFormatError, InfeasibilityError, ParameterError

__all__ = [
    "Berth",
    "Portcall",
    "Assignment",
    "Schedule",
    "ObjectiveWeights",
    "NormalizationContext",
    "KpiReport",
    "Violation",
    "compute_wait",
    "compute_turnaround",
    "objective",
    "check_feasible",
    "baseline_schedule",
    "kpi_report",
    "normalization_from_baseline",
    "allowed_berths",
    "read_portcalls_csv",
    "write_portcalls_csv",
    "read_berths_json",
    "write_berths_json",
    "read_schedule_csv",
    "write_schedule_csv",
]


@dataclass(frozen=True)
class Berth:
    """One berth slot; buffer berths act as overflow for their compat group."""

    berth_id: str
    terminal_id: str
    compat_group: str
    is_buffer: bool
    lat: float
    lon: float


@dataclass(frozen=True)
class Portcall:
    """One vessel visit: anchorage arrival through end of berth service.

    is_fixed / is_buffer_eligible start False and are materialized once per
    run by the constraint sampler; fixed portcalls never carry buffer
    eligibility.
    """

    portcall_id: str
    vessel_id: str
    arrival_time: int
    requested_berth: str
    service_duration: int
    is_fixed: bool = False
    is_buffer_eligible: bool = False

    def __post_init__(self):
        if self.service_duration < 1:
            raise ParameterError(
                f"portcall {self.portcall_id}: service_duration must be >= 1 minute"
            )
        if self.is_fixed and self.is_buffer_eligible:
            raise ParameterError(
                f"portcall {self.portcall_id}: fixed portcalls cannot be buffer-eligible"
            )


@dataclass(frozen=True)
class Assignment:
    """A concrete (portcall, berth, start-time) pairing."""

    portcall_id: str
    berth_id: str
    berth_start: int


@dataclass(frozen=True)
class Schedule:
    """A full assignment of every portcall to a berth and start time."""

    assignments: tuple[Assignment, ...]

    def by_portcall(self) -> dict[str, Assignment]:
        return {a.portcall_id: a for a in self.assignments}

    def key(self) -> tuple:
        """Content key for deduplication, independent of assignment order."""
        return tuple(sorted((a.portcall_id, a.berth_id, a.berth_start)
                            for a in self.assignments))


@dataclass(frozen=True)
class ObjectiveWeights:
    """Normalized weights on the two KPIs; w_wait + w_turn must equal 1."""

    w_wait: float
    w_turn: float

    def __post_init__(self):
        if not (0.0 <= self.w_wait <= 1.0 and 0.0 <= self.w_turn <= 1.0):
            raise ParameterError("objective weights must lie in [0, 1]")
        if not math.isclose(self.w_wait + self.w_turn, 1.0, abs_tol=1e-9):
            raise ParameterError("objective weights must sum to 1")


@dataclass(frozen=True)
class NormalizationContext:
    """Baseline-average references that normalize the two KPI terms."""

    ref_wait: float
    ref_turn: float


@dataclass(frozen=True)
class KpiReport:
    """Average wait / turnaround KPIs with reductions against a baseline."""

    avg_wait: float
    avg_turnaround: float
    wait_reduction_pct: Optional[float] = None
    turnaround_reduction_pct: Optional[float] = None
    runtime_sec: float = 0.0


@dataclass(frozen=True)
class Violation:
    """One feasibility breach; violations are data, not exceptions."""

    kind: str
    portcall_id: Optional[str]
    detail: str


def compute_wait(portcall: Portcall, a: Assignment) -> int:
    """Anchorage-to-berth-start delay in minutes."""
    if a.portcall_id != portcall.portcall_id:
        raise ParameterError(
            f"assignment {a.portcall_id} does not match portcall {portcall.portcall_id}"
        )
    wait = a.berth_start - portcall.arrival_time
    if wait < 0:
        raise InfeasibilityError(
            f"portcall {portcall.portcall_id}: berth_start precedes arrival"
        )
    return wait


def compute_turnaround(portcall: Portcall, a: Assignment) -> int:
    """Total in-port minutes: wait plus service duration."""
    return compute_wait(portcall, a) + portcall.service_duration


def weighted_objective(total_wait: float, total_turn: float, n: int,
                       weights: ObjectiveWeights, norm: NormalizationContext) -> float:
    """Shared objective formula; zero-weight terms skip their reference guard."""
    j = 0.0
    if weights.w_wait != 0.0:
        if norm.ref_wait <= 0.0:
            raise ParameterError("wait-weighted objective needs a positive baseline average wait")
        j += weights.w_wait * ((total_wait / n) / norm.ref_wait)
    if weights.w_turn != 0.0:
        if norm.ref_turn <= 0.0:
            raise ParameterError("turnaround-weighted objective needs a positive baseline average")
        j += weights.w_turn * ((total_turn / n) / norm.ref_turn)
    return j


def objective(s: Schedule, portcalls: Sequence[Portcall],
              weights: ObjectiveWeights, norm: NormalizationContext) -> float:
    """Weighted, baseline-normalized objective; lower is better.

    Rejects schedules with detectable violations (incomplete assignment sets,
    starts before arrival, per-berth overlaps). Compatibility and fixed-pair
    rules need berth/baseline context and live in check_feasible.
    """
    if not portcalls:
        raise ParameterError("objective needs at least one portcall")
    by_pc = s.by_portcall()
    violations = _structural_violations(s, portcalls, by_pc)
    if violations:
        raise InfeasibilityError("infeasible schedule passed to objective", violations)
    total_wait = 0
    total_turn = 0
    for pc in portcalls:
        w = by_pc[pc.portcall_id].berth_start - pc.arrival_time
        total_wait += w
        total_turn += w + pc.service_duration
    return weighted_objective(total_wait, total_turn, len(portcalls), weights, norm)


def _structural_violations(s: Schedule, portcalls: Sequence[Portcall],
                           by_pc: Mapping[str, Assignment]) -> list[Violation]:
    """Violations detectable without berth metadata or a baseline."""
    out: list[Violation] = []
    known = {pc.portcall_id: pc for pc in portcalls}
    seen: set[str] = set()
    for a in s.assignments:
        if a.portcall_id not in known:
            out.append(Violation("unknown-portcall", a.portcall_id,
                                 "assignment references no portcall in the dataset"))
            continue
        if a.portcall_id in seen:
            out.append(Violation("duplicate-portcall", a.portcall_id,
                                 "portcall assigned more than once"))
        seen.add(a.portcall_id)
    for pid in known:
        if pid not in seen:
            out.append(Violation("missing-portcall", pid, "portcall has no assignment"))
    if out:
        return out
    for pc in portcalls:
        a = by_pc[pc.portcall_id]
        if a.berth_start < pc.arrival_time:
            out.append(Violation("start-before-arrival", pc.portcall_id,
                                 f"berth_start {a.berth_start} < arrival {pc.arrival_time}"))
    out.extend(_overlap_violations(s, known))
    return out


def _overlap_violations(s: Schedule, known: Mapping[str, Portcall]) -> list[Violation]:
    out: list[Violation] = []
    per_berth: dict[str, list[tuple[int, int, str]]] = {}
    for a in s.assignments:
        pc = known.get(a.portcall_id)
        if pc is None:
            continue
        per_berth.setdefault(a.berth_id, []).append(
            (a.berth_start, a.berth_start + pc.service_duration, a.portcall_id))
    for berth_id, spans in per_berth.items():
        spans.sort()
        for (s0, e0, p0), (s1, e1, p1) in zip(spans, spans[1:]):
            if s1 < e0:
                out.append(Violation(
                    "per-berth-overlap", p1,
                    f"overlaps {p0} on berth {berth_id}: [{s1},{e1}) vs [{s0},{e0})"))
    return out


def allowed_berths(pc: Portcall, berths: Sequence[Berth]) -> list[str]:
    """Berths a flexible portcall may use, requested berth first.

    Same compat group as the requested berth; non-buffer peers always, buffer
    peers only when the portcall is buffer-eligible. The requested berth itself
    is always allowed so historical baselines stay feasible.
    """
    by_id = {b.berth_id: b for b in berths}
    req = by_id.get(pc.requested_berth)
    if req is None:
        raise DataFormatError(
            f"portcall {pc.portcall_id} requests unknown berth {pc.requested_berth}")
    out = [req.berth_id]
    group = req.compat_group
    regular = sorted(b.berth_id for b in berths
                     if b.compat_group == group and not b.is_buffer
                     and b.berth_id != req.berth_id)
    out.extend(regular)
    if pc.is_buffer_eligible:
        buffers = sorted(b.berth_id for b in berths
                         if b.compat_group == group and b.is_buffer
                         and b.berth_id != req.berth_id)
        out.extend(buffers)
    return out


def check_feasible(s: Schedule, portcalls: Sequence[Portcall],
                   berths: Sequence[Berth], baseline: Schedule) -> list[Violation]:
    """Return every schedule-invariant breach; empty list means feasible."""
    by_pc = s.by_portcall()
    out = _structural_violations(s, portcalls, by_pc)
    if any(v.kind in ("unknown-portcall", "duplicate-portcall", "missing-portcall")
           for v in out):
        return out
    berth_ids = {b.berth_id for b in berths}
    base_by_pc = baseline.by_portcall()
    for pc in portcalls:
        a = by_pc[pc.portcall_id]
        if a.berth_id not in berth_ids:
            out.append(Violation("unknown-berth", pc.portcall_id,
                                 f"assigned to unknown berth {a.berth_id}"))
            continue
        if pc.is_fixed:
            base = base_by_pc.get(pc.portcall_id)
            if base is None:
                out.append(Violation("fixed-pair-changed", pc.portcall_id,
                                     "fixed portcall missing from baseline"))
            elif a.berth_id != pc.requested_berth or a.berth_start != base.berth_start:
                out.append(Violation(
                    "fixed-pair-changed", pc.portcall_id,
                    f"fixed pair moved to ({a.berth_id}, {a.berth_start}) from "
                    f"({pc.requested_berth}, {base.berth_start})"))
        else:
            allowed = allowed_berths(pc, berths)
            if a.berth_id not in allowed:
                out.append(Violation(
                    "incompatible-berth", pc.portcall_id,
                    f"berth {a.berth_id} not in allowed set {allowed}"))
    return out


def baseline_schedule(portcalls: Sequence[Portcall], berths: Sequence[Berth],
                      observed_starts: Optional[Mapping[str, int]] = None) -> Schedule:
    """Comparison baseline: observed starts when known, else FCFS per requested berth.

    FCFS processes portcalls in (arrival, portcall_id) order; each starts at
    max(arrival, berth's last departure). Observed starts (from ingested stay
    data) are kept as-is but pushed FCFS-style if they overlap on a berth, so
    the baseline is always feasible.
    """
    if not portcalls:
        raise ParameterError("baseline_schedule needs at least one portcall")
    berth_ids = {b.berth_id for b in berths}
    for pc in portcalls:
        if pc.requested_berth not in berth_ids:
            raise DataFormatError(
                f"portcall {pc.portcall_id} requests unknown berth {pc.requested_berth}")
    if observed_starts is None:
        order = sorted(portcalls, key=lambda p: (p.arrival_time, p.portcall_id))
        desired = {pc.portcall_id: pc.arrival_time for pc in order}
    else:
        order = sorted(portcalls,
                       key=lambda p: (observed_starts[p.portcall_id], p.portcall_id))
        desired = {pc.portcall_id: observed_starts[pc.portcall_id] for pc in order}
    last_departure: dict[str, int] = {}
    starts: dict[str, int] = {}
    for pc in order:
        t = max(desired[pc.portcall_id], last_departure.get(pc.requested_berth, 0),
                pc.arrival_time)
        starts[pc.portcall_id] = t
        last_departure[pc.requested_berth] = t + pc.service_duration
    assignments = tuple(Assignment(pc.portcall_id, pc.requested_berth, starts[pc.portcall_id])
                        for pc in portcalls)
    return Schedule(assignments)


def kpi_report(s: Schedule, portcalls: Sequence[Portcall],
               baseline: Optional[KpiReport] = None,
               runtime_sec: float = 0.0) -> KpiReport:
    """Average wait and turnaround, with % reductions when a baseline is given."""
    if not portcalls:
        raise ParameterError("kpi_report needs at least one portcall")
    by_pc = s.by_portcall()
    waits = []
    turns = []
    for pc in portcalls:
        w = compute_wait(pc, by_pc[pc.portcall_id])
        waits.append(w)
        turns.append(w + pc.service_duration)
    avg_wait = sum(waits) / len(waits)
    avg_turn = sum(turns) / len(turns)
    wait_red = turn_red = None
    if baseline is not None:
        wait_red = _reduction_pct(baseline.avg_wait, avg_wait)
        turn_red = _reduction_pct(baseline.avg_turnaround, avg_turn)
    return KpiReport(avg_wait, avg_turn, wait_red, turn_red, runtime_sec)


def _reduction_pct(base: float, new: float) -> float:
    if base == 0.0:
        return 0.0
    return 100.0 * (base - new) / base


def normalization_from_baseline(baseline: Schedule,
                                portcalls: Sequence[Portcall]) -> NormalizationContext:
    """Baseline averages used as the objective's normalization references."""
    report = kpi_report(baseline, portcalls)
    return NormalizationContext(ref_wait=report.avg_wait, ref_turn=report.avg_turnaround)


# ---------------------------------------------------------------------------
# File formats: Portcalls CSV, Berths JSON, Schedule CSV.

PORTCALLS_HEADER = ["portcall_id", "vessel_id", "arrival_utc_min",
                    "requested_berth", "service_min"]
SCHEDULE_HEADER = ["portcall_id", "berth_id", "berth_start_utc_min"]


def write_portcalls_csv(portcalls: Iterable[Portcall]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PORTCALLS_HEADER)
    for pc in portcalls:
        w.writerow([pc.portcall_id, pc.vessel_id, pc.arrival_time,
                    pc.requested_berth, pc.service_duration])
    return buf.getvalue()


def read_portcalls_csv(text: str) -> list[Portcall]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != PORTCALLS_HEADER:
        raise DataFormatError(
            f"portcalls CSV must start with header {','.join(PORTCALLS_HEADER)}")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 5:
            raise DataFormatError(f"portcalls CSV line {lineno}: expected 5 fields")
        try:
            out.append(Portcall(portcall_id=row[0], vessel_id=row[1],
                                arrival_time=int(row[2]), requested_berth=row[3],
                                service_duration=int(row[4])))
        except (ValueError, ParameterError) as exc:
            raise DataFormatError(f"portcalls CSV line {lineno}: {exc}") from exc
    ids = [pc.portcall_id for pc in out]
    if len(set(ids)) != len(ids):
        raise DataFormatError("portcalls CSV contains duplicate portcall_id values")
    return out


def write_berths_json(berths: Iterable[Berth]) -> str:
    payload = [{"berth_id": b.berth_id, "terminal_id": b.terminal_id,
                "compat_group": b.compat_group, "is_buffer": b.is_buffer,
                "lat": b.lat, "lon": b.lon} for b in berths]
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def read_berths_json(text: str) -> list[Berth]:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"berths JSON unreadable: {exc}") from exc
    if not isinstance(payload, list):
        raise DataFormatError("berths JSON must be an array of berth objects")
    out = []
    for i, item in enumerate(payload):
        try:
            out.append(Berth(berth_id=str(item["berth_id"]),
                             terminal_id=str(item["terminal_id"]),
                             compat_group=str(item["compat_group"]),
                             is_buffer=bool(item["is_buffer"]),
                             lat=float(item["lat"]), lon=float(item["lon"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"berths JSON entry {i}: {exc}") from exc
    ids = [b.berth_id for b in out]
    if len(set(ids)) != len(ids):
        raise DataFormatError("berths JSON contains duplicate berth_id values")
    _check_buffer_groups(out)
    return out


def _check_buffer_groups(berths: Sequence[Berth]):
    regular_groups = {b.compat_group for b in berths if not b.is_buffer}
    for b in berths:
        if b.is_buffer and b.compat_group not in regular_groups:
            raise DataFormatError(
                f"buffer berth {b.berth_id} shares no compat_group with a regular berth")


def write_schedule_csv(s: Schedule) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCHEDULE_HEADER)
    for a in s.assignments:
        w.writerow([a.portcall_id, a.berth_id, a.berth_start])
    return buf.getvalue()


def read_schedule_csv(text: str) -> Schedule:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != SCHEDULE_HEADER:
        raise DataFormatError(
            f"schedule CSV must start with header {','.join(SCHEDULE_HEADER)}")
    assignments = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise DataFormatError(f"schedule CSV line {lineno}: expected 3 fields")
        try:
            assignments.append(Assignment(row[0], row[1], int(row[2])))
        except ValueError as exc:
            raise DataFormatError(f"schedule CSV line {lineno}: {exc}") from exc
    return Schedule(tuple(assignments))
