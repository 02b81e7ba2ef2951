"""Probabilistic backlog/delay bounds for buffered wireless links with
log-normal shadowing, plus a Monte Carlo fluid-queue validator."""

__version__ = "0.1.0"

from .arrival import AffineEnvelope, generate_arrivals, log_mgf_bound
from .bounds import (
    BoundQuery,
    BoundResult,
    StabilityRegion,
    UnstableSystemError,
    backlog_bound,
    delay_bound,
    kernel_bound,
    log_kernel_bound,
    stability_region,
)
from .channel import (
    LinkBudget,
    ShadowingChannel,
    capacity_bits_per_slot,
    sample_snr,
    snr_cdf,
    system_gain_db,
)
from .inverse_moment import (
    CdfContractError,
    DiscretizationConfig,
    PointMass,
    QuadratureError,
    exact_inverse_moment,
    inverse_moment_bound,
    inverse_moment_bound_many,
)
from .service import (
    ServiceCharacterization,
    heterogeneous_log_mgf_bound,
    heterogeneous_mgf_bound,
)
from .simulator import (
    PathRecord,
    SimConfig,
    SimOutcome,
    replication_rng,
    run_experiment,
    run_replication,
    simulate_path,
    wilson_halfwidth,
    write_raw_samples,
)

__all__ = [
    "AffineEnvelope",
    "BoundQuery",
    "BoundResult",
    "CdfContractError",
    "DiscretizationConfig",
    "LinkBudget",
    "PathRecord",
    "PointMass",
    "QuadratureError",
    "ServiceCharacterization",
    "ShadowingChannel",
    "SimConfig",
    "SimOutcome",
    "StabilityRegion",
    "UnstableSystemError",
    "backlog_bound",
    "capacity_bits_per_slot",
    "delay_bound",
    "exact_inverse_moment",
    "generate_arrivals",
    "heterogeneous_log_mgf_bound",
    "heterogeneous_mgf_bound",
    "inverse_moment_bound",
    "inverse_moment_bound_many",
    "kernel_bound",
    "log_kernel_bound",
    "log_mgf_bound",
    "replication_rng",
    "run_experiment",
    "run_replication",
    "sample_snr",
    "simulate_path",
    "snr_cdf",
    "stability_region",
    "system_gain_db",
    "wilson_halfwidth",
    "write_raw_samples",
]
