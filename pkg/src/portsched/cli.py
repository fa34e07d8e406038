"""Command-line entry points: clean, synth, optimize, sweep, bench.

Config precedence is CLI flag > config-file value > built-in default. Every
command writes a run manifest (config echo, input/output hashes, timings);
wall-clock measurements live only in the manifest and the runtime CSVs, so
all other outputs are byte-identical across reruns with equal seeds.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .errors import DataFormatError, InfeasibilityError, ParameterError
from .firefly import FireflyHyper, StopCriteria
from .model import (ObjectiveWeights, baseline_schedule, check_feasible,
                    read_berths_json, read_portcalls_csv, read_schedule_csv,
                    write_berths_json, write_portcalls_csv, write_schedule_csv)
from .orchestrator import (Dataset, ScenarioConfig, benchmark_runtime,
                           run_scenario, sweep_scenarios)
from .pipeline import SyntheticParams, generate_synthetic, read_zones_json, run_cleaning
from .swarm import SwarmHyper

COMMON_DEFAULTS = {"seed": 0, "out_dir": "out"}

SCENARIO_DEFAULTS = {
    "method": "batch",
    "window_days": 7,
    "f": 0.0,
    "r": 0.0,
    "w_wait": 0.0,
    "w_turn": 1.0,
    "pool_size": 100,
    "swarm_size": 40,
    "max_evals": 20000,
    "population": 30,
    "stall_limit": 50,
    "slot_minutes": 15,
    "max_slots": 1344,
}

SYNTH_DEFAULTS = {
    "vessels": 100,
    "berths": 20,
    "buffers": 4,
    "anchorages": 4,
    "horizon_days": 14,
    "portcalls_per_vessel": 2.08,
    "mean_interarrival_min": None,
    "service_mu": 7.0,
    "service_sigma": 0.45,
}

CLEAN_DEFAULTS = {
    "max_speed_knots": 50.0,
    "max_gap_min": 360,
    "cadence_min": 10,
    "min_dwell_min": 30,
}


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as ParameterError (exit code 1)."""

    def error(self, message):
        raise ParameterError(message)


class Config:
    """Layered option lookup: CLI flag > config file > defaults."""

    def __init__(self, args: argparse.Namespace, defaults: dict):
        self.defaults = dict(defaults)
        self.args = vars(args)
        self.file_values = {}
        config_path = self.args.get("config")
        if config_path:
            try:
                self.file_values = json.loads(Path(config_path).read_text())
            except OSError as exc:
                raise DataFormatError(f"cannot read config file: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"config file is not valid JSON: {exc}") from exc
            if not isinstance(self.file_values, dict):
                raise DataFormatError("config file must hold a JSON object")

    def get(self, key):
        value = self.args.get(key)
        if value is not None:
            return value
        if key in self.file_values:
            return self.file_values[key]
        if key in self.defaults:
            return self.defaults[key]
        raise KeyError(key)

    def echo(self) -> dict:
        """Effective values for every known option, for the manifest."""
        out = {}
        for key in self.defaults:
            try:
                out[key] = self.get(key)
            except KeyError:
                pass
        return out


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


class OutputWriter:
    """Collects output files, writes them atomically, remembers their hashes."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.hashes: dict[str, str] = {}

    def write(self, name: str, text: str):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        _atomic_write(self.out_dir / name, text)
        self.hashes[name] = _sha256(text.encode("utf-8"))


def _read_input(path_str: str) -> str:
    try:
        return Path(path_str).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataFormatError(f"cannot read {path_str}: {exc}") from exc


def _write_manifest(writer: OutputWriter, command: str, cfg: Config,
                    inputs: dict[str, str], started_at: str,
                    timings: dict[str, float], extra: Optional[dict] = None):
    manifest = {
        "command": command,
        "config": cfg.echo(),
        "inputs_sha256": inputs,
        "outputs_sha256": dict(sorted(writer.hashes.items())),
        "started_at_utc": started_at,
        "timings_sec": {k: round(v, 6) for k, v in timings.items()},
        "tool_version": __version__,
    }
    if extra:
        manifest.update(extra)
    writer.write("manifest.json",
                 json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _scenario_from_cfg(cfg: Config, seed: int) -> ScenarioConfig:
    swarm = SwarmHyper(max_iter=int(cfg.get("pool_size")),
                       swarm_size=int(cfg.get("swarm_size")),
                       slot_minutes=int(cfg.get("slot_minutes")),
                       max_slots=int(cfg.get("max_slots")))
    firefly = FireflyHyper(population=int(cfg.get("population")))
    stop = StopCriteria(max_evals=int(cfg.get("max_evals")),
                        stall_limit=int(cfg.get("stall_limit")))
    return ScenarioConfig(
        fixed_ratio=float(cfg.get("f")),
        randomness_ratio=float(cfg.get("r")),
        weights=ObjectiveWeights(float(cfg.get("w_wait")), float(cfg.get("w_turn"))),
        paradigm=str(cfg.get("method")),
        window_days=int(cfg.get("window_days")),
        seed=seed,
        swarm=swarm,
        firefly=firefly,
        stop=stop,
    )


def _load_dataset(cfg: Config) -> tuple[Dataset, dict[str, str]]:
    portcalls_text = _read_input(cfg.get("portcalls"))
    berths_text = _read_input(cfg.get("berths"))
    inputs = {"portcalls": _sha256(portcalls_text.encode()),
              "berths": _sha256(berths_text.encode())}
    portcalls = read_portcalls_csv(portcalls_text)
    berths = read_berths_json(berths_text)
    baseline_path = cfg.args.get("baseline") or cfg.file_values.get("baseline")
    if baseline_path:
        baseline_text = _read_input(str(baseline_path))
        inputs["baseline"] = _sha256(baseline_text.encode())
        baseline = read_schedule_csv(baseline_text)
    else:
        baseline = baseline_schedule(portcalls, berths)
    if not portcalls:
        raise DataFormatError("dataset has no portcalls")
    return Dataset(portcalls, berths, baseline), inputs


# ---------------------------------------------------------------------------
# Commands.

def cmd_clean(cfg: Config) -> int:
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    t0 = time.perf_counter()
    zones_text = _read_input(cfg.get("zones"))
    ais_text = _read_input(cfg.get("ais"))
    zones = read_zones_json(zones_text)
    result = run_cleaning(ais_text, zones,
                          max_speed_knots=float(cfg.get("max_speed_knots")),
                          max_gap_min=int(cfg.get("max_gap_min")),
                          cadence_min=int(cfg.get("cadence_min")),
                          min_dwell_min=int(cfg.get("min_dwell_min")))
    writer = OutputWriter(Path(cfg.get("out_dir")))
    writer.write("portcalls.csv", write_portcalls_csv(result.portcalls))
    writer.write("berths.json", write_berths_json(result.berths))
    if result.baseline is not None:
        writer.write("baseline.csv", write_schedule_csv(result.baseline))
    writer.write("cleaning_report.json", result.report.to_json())
    _write_manifest(writer, "clean", cfg,
                    {"ais": _sha256(ais_text.encode()),
                     "zones": _sha256(zones_text.encode())},
                    started, {"total": time.perf_counter() - t0})
    r = result.report
    print(f"portcalls: {len(result.portcalls)}  rejected rows: {r.rows_rejected}  "
          f"drift flags: {r.drift_flags}  gaps filled: {r.gaps_filled}  "
          f"gaps open: {r.gaps_open}")
    return 0


def cmd_synth(cfg: Config) -> int:
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    t0 = time.perf_counter()
    mean_ia = cfg.get("mean_interarrival_min")
    params = SyntheticParams(
        n_vessels=int(cfg.get("vessels")),
        n_berths=int(cfg.get("berths")),
        n_anchorages=int(cfg.get("anchorages")),
        n_buffer_berths=int(cfg.get("buffers")),
        horizon_days=int(cfg.get("horizon_days")),
        portcalls_per_vessel=float(cfg.get("portcalls_per_vessel")),
        mean_interarrival_min=float(mean_ia) if mean_ia is not None else None,
        service_mu=float(cfg.get("service_mu")),
        service_sigma=float(cfg.get("service_sigma")))
    seed = int(cfg.get("seed"))
    berths, portcalls, baseline = generate_synthetic(params, seed)
    writer = OutputWriter(Path(cfg.get("out_dir")))
    writer.write("portcalls.csv", write_portcalls_csv(portcalls))
    writer.write("berths.json", write_berths_json(berths))
    writer.write("baseline.csv", write_schedule_csv(baseline))
    _write_manifest(writer, "synth", cfg, {}, started,
                    {"total": time.perf_counter() - t0},
                    extra={"seeds": {"generator": seed}})
    print(f"generated {len(portcalls)} portcalls over {params.horizon_days} days "
          f"({len(berths)} berths, seed {seed})")
    return 0


def cmd_optimize(cfg: Config) -> int:
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    t0 = time.perf_counter()
    dataset, inputs = _load_dataset(cfg)
    seed = int(cfg.get("seed"))
    scenario = _scenario_from_cfg(cfg, seed)
    result = run_scenario(dataset, scenario)

    violations = check_feasible(result.schedule, result.portcalls, dataset.berths,
                                dataset.baseline)
    if violations:
        raise InfeasibilityError("optimizer produced an infeasible schedule",
                                 violations)

    kpi_payload = {
        "avg_wait_min": result.report.avg_wait,
        "avg_turnaround_min": result.report.avg_turnaround,
        "baseline_avg_wait_min": result.baseline_report.avg_wait,
        "baseline_avg_turnaround_min": result.baseline_report.avg_turnaround,
        "wait_reduction_pct": result.report.wait_reduction_pct,
        "turnaround_reduction_pct": result.report.turnaround_reduction_pct,
        "objective": result.objective_value,
        "portcalls": len(dataset.portcalls),
    }
    writer = OutputWriter(Path(cfg.get("out_dir")))
    writer.write("schedule.csv", write_schedule_csv(result.schedule))
    writer.write("kpi.json", json.dumps(kpi_payload, indent=2, sort_keys=True) + "\n")
    _write_manifest(writer, "optimize", cfg, inputs, started,
                    {"total": time.perf_counter() - t0,
                     "optimize": result.report.runtime_sec},
                    extra={"seeds": {"scenario": seed}})
    b = result.baseline_report
    o = result.report
    print(f"portcalls: {len(dataset.portcalls)}  berths: {len(dataset.berths)}  "
          f"method: {scenario.paradigm}")
    print(f"baseline : avg wait {b.avg_wait:.1f} min  avg turnaround {b.avg_turnaround:.1f} min")
    print(f"optimized: avg wait {o.avg_wait:.1f} min  avg turnaround {o.avg_turnaround:.1f} min")
    print(f"reduction: wait {o.wait_reduction_pct:.1f}%  "
          f"turnaround {o.turnaround_reduction_pct:.1f}%")
    print(f"objective J = {result.objective_value:.4f}  "
          f"runtime {o.runtime_sec:.2f} s")
    return 0


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v != ""]
    except ValueError as exc:
        raise ParameterError(f"bad value list {text!r}: {exc}") from exc


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in str(text).split(",") if v != ""]
    except ValueError as exc:
        raise ParameterError(f"bad value list {text!r}: {exc}") from exc


def cmd_sweep(cfg: Config) -> int:
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    t0 = time.perf_counter()
    dataset, inputs = _load_dataset(cfg)
    f_values = _parse_float_list(cfg.get("f_values"))
    r_values = _parse_float_list(cfg.get("r_values"))
    seeds = _parse_int_list(cfg.get("seeds"))
    paradigm = str(cfg.get("method"))
    template = _scenario_from_cfg(cfg, seed=0)
    result = sweep_scenarios(dataset, f_values, r_values, paradigm, seeds, template)

    writer = OutputWriter(Path(cfg.get("out_dir")))
    writer.write(f"wait_reduction_{paradigm}.csv", result.matrix_csv("wait_reduction"))
    writer.write(f"turnaround_reduction_{paradigm}.csv",
                 result.matrix_csv("turnaround_reduction"))
    writer.write(f"runtime_{paradigm}.csv", result.matrix_csv("runtime"))
    plot_lines = ["f,r,paradigm,kpi,value,seed"]
    for f, r, par, kpi, value, seed in result.plot_rows():
        plot_lines.append(f"{f!r},{r!r},{par},{kpi},{value!r},{seed}")
    writer.write(f"plot_data_{paradigm}.csv", "\n".join(plot_lines) + "\n")
    _write_manifest(writer, "sweep", cfg, inputs, started,
                    {"total": time.perf_counter() - t0},
                    extra={"seeds": {"sweep": seeds}})
    print(f"swept {len(f_values)}x{len(r_values)} grid over {len(seeds)} seeds "
          f"({paradigm})")
    return 0


def cmd_bench(cfg: Config) -> int:
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    t0 = time.perf_counter()
    sizes = _parse_int_list(cfg.get("sizes"))
    seed = int(cfg.get("seed"))
    scenario = _scenario_from_cfg(cfg, seed)
    result = benchmark_runtime(sizes, scenario, gen_seed=seed)
    writer = OutputWriter(Path(cfg.get("out_dir")))
    writer.write("runtime.csv", result.runtime_csv())
    _write_manifest(writer, "bench", cfg, {}, started,
                    {"total": time.perf_counter() - t0},
                    extra={"seeds": {"bench": seed},
                           "rolling_batch_ratio": {str(k): round(v, 4)
                                                   for k, v in result.ratios.items()},
                           "loglog_slope": {k: round(v, 4)
                                            for k, v in result.slopes.items()}})
    for size, paradigm, seconds in result.rows:
        print(f"size {size:>6}  {paradigm:<8} {seconds:8.2f} s")
    for size in sizes:
        print(f"rolling/batch ratio at {size}: {result.ratios[size]:.3f}")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing.

def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--config", type=str, default=None,
                        help="JSON file with option values (flags override)")
    parser.add_argument("--out-dir", dest="out_dir", type=str, default=None)


def _add_scenario_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--method", choices=["batch", "rolling"], default=None)
    parser.add_argument("--window-days", dest="window_days", type=int, default=None)
    parser.add_argument("--f", type=float, default=None,
                        help="fixed ratio of vessel-terminal pairs")
    parser.add_argument("--r", type=float, default=None,
                        help="randomness ratio (buffer-eligible share of flexible pairs)")
    parser.add_argument("--w-wait", dest="w_wait", type=float, default=None)
    parser.add_argument("--w-turn", dest="w_turn", type=float, default=None)
    parser.add_argument("--max-evals", dest="max_evals", type=int, default=None)
    parser.add_argument("--pool-size", dest="pool_size", type=int, default=None,
                        help="swarm iterations, i.e. the candidate-pool size")
    parser.add_argument("--swarm-size", dest="swarm_size", type=int, default=None)
    parser.add_argument("--population", type=int, default=None)
    parser.add_argument("--stall-limit", dest="stall_limit", type=int, default=None)
    parser.add_argument("--slot-minutes", dest="slot_minutes", type=int, default=None)
    parser.add_argument("--max-slots", dest="max_slots", type=int, default=None)


def _add_dataset_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--portcalls", required=True)
    parser.add_argument("--berths", required=True)
    parser.add_argument("--baseline", default=None,
                        help="schedule CSV with observed baseline starts (default: FCFS)")


def build_parser() -> _Parser:
    parser = _Parser(prog="portsched",
                     description="Coordinative vessel-berth scheduling optimizer")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_clean = sub.add_parser("clean", help="clean AIS data and derive portcalls")
    p_clean.add_argument("--ais", required=True)
    p_clean.add_argument("--zones", required=True)
    p_clean.add_argument("--max-speed-knots", dest="max_speed_knots",
                         type=float, default=None)
    p_clean.add_argument("--max-gap-min", dest="max_gap_min", type=int, default=None)
    p_clean.add_argument("--cadence-min", dest="cadence_min", type=int, default=None)
    p_clean.add_argument("--min-dwell-min", dest="min_dwell_min", type=int, default=None)
    _add_common(p_clean)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--vessels", type=int, default=None)
    p_synth.add_argument("--berths", type=int, default=None)
    p_synth.add_argument("--buffers", type=int, default=None)
    p_synth.add_argument("--anchorages", type=int, default=None)
    p_synth.add_argument("--horizon-days", dest="horizon_days", type=int, default=None)
    p_synth.add_argument("--portcalls-per-vessel", dest="portcalls_per_vessel",
                         type=float, default=None)
    p_synth.add_argument("--mean-interarrival-min", dest="mean_interarrival_min",
                         type=float, default=None)
    p_synth.add_argument("--service-mu", dest="service_mu", type=float, default=None)
    p_synth.add_argument("--service-sigma", dest="service_sigma",
                         type=float, default=None)
    _add_common(p_synth)

    p_opt = sub.add_parser("optimize", help="optimize one scenario")
    _add_dataset_flags(p_opt)
    _add_scenario_flags(p_opt)
    _add_common(p_opt)

    p_sweep = sub.add_parser("sweep", help="sweep the (f, r) scenario grid")
    _add_dataset_flags(p_sweep)
    _add_scenario_flags(p_sweep)
    p_sweep.add_argument("--f-values", dest="f_values", default=None)
    p_sweep.add_argument("--r-values", dest="r_values", default=None)
    p_sweep.add_argument("--seeds", default=None, help="comma-separated seed list")
    _add_common(p_sweep)

    p_bench = sub.add_parser("bench", help="benchmark runtimes across dataset sizes")
    p_bench.add_argument("--sizes", default=None, help="comma-separated portcall counts")
    _add_scenario_flags(p_bench)
    _add_common(p_bench)

    return parser


COMMANDS = {
    "clean": (cmd_clean, {**COMMON_DEFAULTS, **CLEAN_DEFAULTS}),
    "synth": (cmd_synth, {**COMMON_DEFAULTS, **SYNTH_DEFAULTS}),
    "optimize": (cmd_optimize, {**COMMON_DEFAULTS, **SCENARIO_DEFAULTS}),
    "sweep": (cmd_sweep, {**COMMON_DEFAULTS, **SCENARIO_DEFAULTS,
                          "f_values": "0,0.1,0.3,0.5,0.7,0.9",
                          "r_values": "0,0.1,0.3,0.5,0.7,0.9",
                          "seeds": "0"}),
    "bench": (cmd_bench, {**COMMON_DEFAULTS, **SCENARIO_DEFAULTS,
                          "sizes": "50,100,200"}),
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        command, defaults = COMMANDS[args.command]
        cfg = Config(args, defaults)
        return command(cfg)
    except ParameterError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except InfeasibilityError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        for v in exc.violations:
            print(f"  {v.kind} {v.portcall_id}: {v.detail}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
