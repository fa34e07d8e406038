"""End-to-end optimization drivers: batch, rolling horizon, sweeps, benchmarks.

Batch optimizes the whole dataset as one window. Rolling horizon partitions
portcalls by arrival into fixed-length windows, optimizes them in order, and
freezes each window's commitments as berth-occupancy blocks for later windows
(fixed pairs of future windows are likewise protected up front, so the
concatenated schedule is always feasible). Batch is literally the
single-window case of the same driver, which makes the two paradigms
bit-identical when one window covers the horizon.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import statistics
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .engine import OccupancyBlock
from .errors import ParameterError
from .firefly import FireflyHyper, StopCriteria, run_firefly
from .model import (Berth, KpiReport, ObjectiveWeights, Portcall, Schedule,
                    kpi_report, normalization_from_baseline, objective)
from .pipeline import SyntheticParams, generate_synthetic
from .swarm import (CandidatePool, SwarmHyper, apply_constraints,
                    init_constraints, run_swarm)

__all__ = [
    "Dataset",
    "ScenarioConfig",
    "RunResult",
    "SweepResult",
    "BenchmarkResult",
    "derive_seed",
    "run_batch",
    "run_rolling",
    "run_scenario",
    "sweep_scenarios",
    "benchmark_runtime",
]

MINUTES_PER_DAY = 1440


@dataclass
class Dataset:
    """A complete problem instance: portcalls, berths and the baseline schedule."""

    portcalls: list[Portcall]
    berths: list[Berth]
    baseline: Schedule


@dataclass(frozen=True)
class ScenarioConfig:
    """One optimization run's knobs: constraint ratios, paradigm, seeds, hyper."""

    fixed_ratio: float = 0.0
    randomness_ratio: float = 0.0
    weights: ObjectiveWeights = field(default_factory=lambda: ObjectiveWeights(0.0, 1.0))
    paradigm: str = "batch"
    window_days: int = 7
    seed: int = 0
    swarm: SwarmHyper = field(default_factory=SwarmHyper)
    firefly: FireflyHyper = field(default_factory=FireflyHyper)
    stop: StopCriteria = field(default_factory=StopCriteria)

    def __post_init__(self):
        if self.paradigm not in ("batch", "rolling"):
            raise ParameterError("paradigm must be 'batch' or 'rolling'")
        if self.window_days < 1:
            raise ParameterError("window_days must be >= 1")


@dataclass
class RunResult:
    """Optimized schedule plus everything needed to audit the run."""

    schedule: Schedule
    report: KpiReport
    baseline_report: KpiReport
    portcalls: list[Portcall]
    pools: list[CandidatePool]
    objective_value: float


def derive_seed(seed: int, label: str) -> int:
    """Stable per-stage sub-seed; independent stages never share RNG streams."""
    digest = hashlib.sha256(f"{seed}/{label}".encode()).hexdigest()
    return int(digest[:16], 16)


def _partition_windows(portcalls: Sequence[Portcall],
                       window_min: Optional[int]) -> list[list[Portcall]]:
    """Consecutive arrival windows, dataset order preserved, empties skipped."""
    if window_min is None:
        return [list(portcalls)]
    t0 = min(pc.arrival_time for pc in portcalls)
    buckets: dict[int, list[Portcall]] = {}
    for pc in portcalls:
        buckets.setdefault((pc.arrival_time - t0) // window_min, []).append(pc)
    return [buckets[k] for k in sorted(buckets)]


def _run_windows(dataset: Dataset, scenario: ScenarioConfig,
                 window_min: Optional[int]) -> RunResult:
    if not dataset.portcalls:
        raise ParameterError("dataset has no portcalls")
    t_start = time.perf_counter()
    windows = _partition_windows(dataset.portcalls, window_min)
    base_by_pc = dataset.baseline.by_portcall()

    cons = []
    marked: list[list[Portcall]] = []
    fixed_blocks: list[list[OccupancyBlock]] = []
    for i, win in enumerate(windows):
        con = init_constraints(win, scenario.fixed_ratio, scenario.randomness_ratio,
                               derive_seed(scenario.seed, f"window{i}:constraints"))
        win_marked = apply_constraints(win, con)
        blocks = []
        for pc in win_marked:
            if pc.is_fixed:
                a = base_by_pc[pc.portcall_id]
                blocks.append((a.berth_id, a.berth_start,
                               a.berth_start + pc.service_duration))
        cons.append(con)
        marked.append(win_marked)
        fixed_blocks.append(blocks)

    committed: dict[str, object] = {}
    committed_blocks: list[OccupancyBlock] = []
    pools: list[CandidatePool] = []
    for i, win_marked in enumerate(marked):
        future: list[OccupancyBlock] = []
        for later in fixed_blocks[i + 1:]:
            future.extend(later)
        occupancy = tuple(committed_blocks) + tuple(future)
        pool = run_swarm(win_marked, dataset.berths, dataset.baseline, cons[i],
                         scenario.swarm, scenario.weights,
                         derive_seed(scenario.seed, f"window{i}:swarm"),
                         occupancy=occupancy)
        best = run_firefly(pool, win_marked, dataset.berths, dataset.baseline,
                           scenario.weights, scenario.firefly, scenario.stop,
                           derive_seed(scenario.seed, f"window{i}:firefly"),
                           occupancy=occupancy)
        svc = {pc.portcall_id: pc.service_duration for pc in win_marked}
        for a in best.assignments:
            committed[a.portcall_id] = a
            committed_blocks.append((a.berth_id, a.berth_start,
                                     a.berth_start + svc[a.portcall_id]))
        pools.append(pool)

    marked_by_pid = {pc.portcall_id: pc for win in marked for pc in win}
    portcalls_out = [marked_by_pid[pc.portcall_id] for pc in dataset.portcalls]
    schedule = Schedule(tuple(committed[pc.portcall_id] for pc in dataset.portcalls))
    runtime = time.perf_counter() - t_start

    baseline_report = kpi_report(dataset.baseline, portcalls_out)
    report = kpi_report(schedule, portcalls_out, baseline=baseline_report,
                        runtime_sec=runtime)
    norm = normalization_from_baseline(dataset.baseline, portcalls_out)
    j_value = objective(schedule, portcalls_out, scenario.weights, norm)
    return RunResult(schedule, report, baseline_report, portcalls_out, pools, j_value)


def run_batch(dataset: Dataset, scenario: ScenarioConfig) -> RunResult:
    """Optimize the whole dataset as one window."""
    if scenario.paradigm != "batch":
        raise ParameterError("run_batch expects a batch-paradigm scenario")
    return _run_windows(dataset, scenario, None)


def run_rolling(dataset: Dataset, scenario: ScenarioConfig) -> RunResult:
    """Optimize consecutive arrival windows, freezing each window's commitments."""
    if scenario.paradigm != "rolling":
        raise ParameterError("run_rolling expects a rolling-paradigm scenario")
    return _run_windows(dataset, scenario, scenario.window_days * MINUTES_PER_DAY)


def run_scenario(dataset: Dataset, scenario: ScenarioConfig) -> RunResult:
    if scenario.paradigm == "batch":
        return run_batch(dataset, scenario)
    return run_rolling(dataset, scenario)


@dataclass
class CellRun:
    seed: int
    report: KpiReport
    objective_value: float


@dataclass
class SweepResult:
    """Per-(fixed_ratio, randomness_ratio) cell results over all seeds."""

    f_values: list[float]
    r_values: list[float]
    paradigm: str
    cells: dict[tuple[float, float], list[CellRun]]

    def median(self, f: float, r: float, kpi: str) -> float:
        runs = self.cells[(f, r)]
        if kpi == "wait_reduction":
            return statistics.median(c.report.wait_reduction_pct for c in runs)
        if kpi == "turnaround_reduction":
            return statistics.median(c.report.turnaround_reduction_pct for c in runs)
        if kpi == "objective":
            return statistics.median(c.objective_value for c in runs)
        if kpi == "runtime":
            return statistics.median(c.report.runtime_sec for c in runs)
        raise ParameterError(f"unknown kpi {kpi}")

    def matrix_csv(self, kpi: str) -> str:
        """Reduction matrix, one row per fixed ratio, one column per randomness ratio."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["f/r"] + [repr(r) for r in self.r_values])
        for f in self.f_values:
            w.writerow([repr(f)] + [repr(self.median(f, r, kpi)) for r in self.r_values])
        return buf.getvalue()

    def plot_rows(self) -> list[tuple]:
        """Long-form (f, r, paradigm, kpi, value, seed) rows for external plotting."""
        rows = []
        for f in self.f_values:
            for r in self.r_values:
                for run in self.cells[(f, r)]:
                    rows.append((f, r, self.paradigm, "wait_reduction",
                                 run.report.wait_reduction_pct, run.seed))
                    rows.append((f, r, self.paradigm, "turnaround_reduction",
                                 run.report.turnaround_reduction_pct, run.seed))
        return rows


def sweep_scenarios(dataset: Dataset, f_values: Sequence[float],
                    r_values: Sequence[float], paradigm: str,
                    seeds: Sequence[int],
                    template: Optional[ScenarioConfig] = None) -> SweepResult:
    """Run every (f, r) cell over every seed and collect per-cell KPI reports."""
    if not f_values or not r_values or not seeds:
        raise ParameterError("sweep needs non-empty f, r and seed lists")
    if template is None:
        template = ScenarioConfig()
    cells: dict[tuple[float, float], list[CellRun]] = {}
    for f in f_values:
        for r in r_values:
            runs = []
            for seed in seeds:
                scenario = replace(template, fixed_ratio=f, randomness_ratio=r,
                                   paradigm=paradigm, seed=seed)
                result = run_scenario(dataset, scenario)
                runs.append(CellRun(seed, result.report, result.objective_value))
            cells[(f, r)] = runs
    return SweepResult(list(f_values), list(r_values), paradigm, cells)


@dataclass
class BenchmarkResult:
    """Wall-clock rows per (size, paradigm) plus derived scaling summaries."""

    rows: list[tuple[int, str, float]]
    ratios: dict[int, float]
    slopes: dict[str, float]

    def runtime_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["size", "paradigm", "seconds"])
        for size, paradigm, seconds in self.rows:
            w.writerow([size, paradigm, repr(seconds)])
        return buf.getvalue()


def bench_dataset(size: int, seed: int) -> Dataset:
    """Synthetic instance scaled so the horizon grows with the portcall count."""
    n_vessels = max(1, round(size / 2.08))
    horizon_days = max(7, round(7 * size / 50))
    params = SyntheticParams(n_vessels=n_vessels, n_berths=20, n_anchorages=4,
                             n_buffer_berths=4, horizon_days=horizon_days)
    berths, portcalls, baseline = generate_synthetic(params, seed)
    return Dataset(portcalls, berths, baseline)


def benchmark_runtime(sizes: Sequence[int], scenario: ScenarioConfig,
                      gen_seed: int = 7) -> BenchmarkResult:
    """Wall-clock comparison of both paradigms across dataset sizes.

    Reports the rolling/batch ratio per size and a log-log slope estimate of
    runtime against size per paradigm.
    """
    if len(sizes) < 2:
        raise ParameterError("benchmark needs at least 2 dataset sizes")
    rows: list[tuple[int, str, float]] = []
    ratios: dict[int, float] = {}
    times: dict[str, list[tuple[int, float]]] = {"batch": [], "rolling": []}
    for size in sizes:
        dataset = bench_dataset(size, derive_seed(gen_seed, f"bench{size}"))
        per_paradigm = {}
        for paradigm in ("batch", "rolling"):
            result = run_scenario(dataset, replace(scenario, paradigm=paradigm))
            seconds = result.report.runtime_sec
            rows.append((size, paradigm, seconds))
            times[paradigm].append((size, seconds))
            per_paradigm[paradigm] = seconds
        ratios[size] = per_paradigm["rolling"] / per_paradigm["batch"]
    slopes = {}
    for paradigm, points in times.items():
        xs = [math.log(s) for s, _ in points]
        ys = [math.log(max(t, 1e-9)) for _, t in points]
        x_mean = sum(xs) / len(xs)
        y_mean = sum(ys) / len(ys)
        denom = sum((x - x_mean) ** 2 for x in xs)
        slopes[paradigm] = (sum((x - x_mean) * (y - y_mean)
                                for x, y in zip(xs, ys)) / denom if denom else 0.0)
    return BenchmarkResult(rows, ratios, slopes)
