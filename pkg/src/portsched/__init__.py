"""Coordinative vessel-berth scheduling: data pipeline, optimizers, reporting."""

__version__ = "0.1.0"

from .errors import (DataFormatError, InfeasibilityError, ParameterError,
                     PortschedError)
from .model import (Assignment, Berth, KpiReport, NormalizationContext,
                    ObjectiveWeights, Portcall, Schedule, Violation,
                    baseline_schedule, check_feasible, compute_turnaround,
                    compute_wait, kpi_report, normalization_from_baseline,
                    objective)
from .pipeline import (AisRecord, CleaningReport, StayEvent, SyntheticParams,
                       Zone, derive_portcalls, detect_drift, extract_stays,
                       fill_gaps, generate_synthetic, parse_ais, run_cleaning)
from .swarm import (CandidatePool, ConstraintSpec, SwarmHyper,
                    apply_constraints, decode, init_constraints, repair,
                    run_swarm)
from .firefly import (FireflyHyper, SearchSpace, StopCriteria,
                      build_search_space, move_firefly, run_firefly)
from .orchestrator import (Dataset, RunResult, ScenarioConfig, SweepResult,
                           benchmark_runtime, derive_seed, run_batch,
                           run_rolling, run_scenario, sweep_scenarios)

__all__ = [
    "__version__",
    "PortschedError", "ParameterError", "DataFormatError", "InfeasibilityError",
    "Berth", "Portcall", "Assignment", "Schedule", "ObjectiveWeights",
    "NormalizationContext", "KpiReport", "Violation",
    "compute_wait", "compute_turnaround", "objective", "check_feasible",
    "baseline_schedule", "kpi_report", "normalization_from_baseline",
    "AisRecord", "Zone", "StayEvent", "CleaningReport", "SyntheticParams",
    "parse_ais", "detect_drift", "fill_gaps", "extract_stays",
    "derive_portcalls", "generate_synthetic", "run_cleaning",
    "ConstraintSpec", "SwarmHyper", "CandidatePool",
    "init_constraints", "apply_constraints", "decode", "repair", "run_swarm",
    "FireflyHyper", "StopCriteria", "SearchSpace",
    "build_search_space", "move_firefly", "run_firefly",
    "Dataset", "ScenarioConfig", "RunResult", "SweepResult",
    "derive_seed", "run_batch", "run_rolling", "run_scenario",
    "sweep_scenarios", "benchmark_runtime",
]
