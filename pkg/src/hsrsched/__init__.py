"""Deadline-constrained multi-service downlink scheduling over a deterministic
time-varying rail link: channel model, traffic, queueing, schedulers, frame
engine, verification checks and a CLI."""

from .analysis import (
    brute_force_lex_min_drops,
    brute_force_min_weighted_drops,
    check_lemma1,
    check_sample_drift,
    constant_B,
    drift_diagnostics,
    oracle_agreement,
    weighted_drop_objective,
)
from .channel import (
    CapacityProfile,
    RadioConfig,
    TrajectoryConfig,
    build_capacity_profile,
    distance_at,
    frame_capacity,
    path_loss_db,
    rate_bps,
    snr_db,
    write_profile_csv,
)
from .engine import RunSummary, SimConfig, TraceLog, delivery_ratio, run, sweep
from .queueing import (
    ContractViolation,
    DeadlineQueue,
    DeficitQueue,
    FrameServed,
    cohort_drops,
    deficit_update,
)
from .schedulers import (
    AllocationPlan,
    DcsaScheduler,
    EdfScheduler,
    RoundRobinScheduler,
    Scheduler,
    allocate_cohorts,
    make_scheduler,
    projected_deficit,
)
from .traffic import (
    ArrivalGenerator,
    FeasibilityReport,
    ServiceSpec,
    feasibility_check,
    truncated_poisson_pmf,
)

__version__ = "0.1.0"

__all__ = [
    "AllocationPlan",
    "ArrivalGenerator",
    "CapacityProfile",
    "ContractViolation",
    "DcsaScheduler",
    "DeadlineQueue",
    "DeficitQueue",
    "EdfScheduler",
    "FeasibilityReport",
    "FrameServed",
    "RadioConfig",
    "RoundRobinScheduler",
    "RunSummary",
    "Scheduler",
    "ServiceSpec",
    "SimConfig",
    "TraceLog",
    "TrajectoryConfig",
    "allocate_cohorts",
    "brute_force_lex_min_drops",
    "brute_force_min_weighted_drops",
    "build_capacity_profile",
    "check_lemma1",
    "check_sample_drift",
    "cohort_drops",
    "constant_B",
    "deficit_update",
    "delivery_ratio",
    "distance_at",
    "drift_diagnostics",
    "feasibility_check",
    "frame_capacity",
    "make_scheduler",
    "oracle_agreement",
    "path_loss_db",
    "projected_deficit",
    "rate_bps",
    "run",
    "snr_db",
    "sweep",
    "truncated_poisson_pmf",
    "weighted_drop_objective",
    "write_profile_csv",
]
