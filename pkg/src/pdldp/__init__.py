"""Sampling and large-deviation tools for the two-parameter Poisson-Dirichlet family."""

from .errors import (
    AccuracyError,
    DomainError,
    InsufficientDataError,
    NumericError,
    OrderingError,
    PdldpError,
    UnsupportedOrderError,
)
from .gem import (
    GemSample,
    RankedPrefix,
    StopRule,
    assign_to_partition,
    rank_prefix,
    sample_gem,
    size_biased_permute,
)
from .harness import EventSpec, SweepConfig, SweepResult, estimate_event_prob, fit_rate_slope, run_sweep
from .measures import BaseMeasure, MeasureSpec, PartitionSpec, PartitionVector
from .perman import PermanContext, perman_density, perman_log_density
from .rates import (
    legendre_J,
    logmgf_L,
    logmgf_Lambda,
    logmgf_psi,
    rate_i1,
    rate_measure_alpha,
    rate_partition,
    rate_pd_prefix,
    relative_entropy,
)
from .sampling import RandomStream, StableSpec, stable_density, tilted_stable_increment
from .subordinator import sample_partition_via_subordinator

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "assign_to_partition",
    "BaseMeasure",
    "DomainError",
    "estimate_event_prob",
    "EventSpec",
    "fit_rate_slope",
    "GemSample",
    "InsufficientDataError",
    "legendre_J",
    "logmgf_L",
    "logmgf_Lambda",
    "logmgf_psi",
    "MeasureSpec",
    "NumericError",
    "OrderingError",
    "PartitionSpec",
    "PartitionVector",
    "PdldpError",
    "perman_density",
    "perman_log_density",
    "PermanContext",
    "RandomStream",
    "rank_prefix",
    "RankedPrefix",
    "rate_i1",
    "rate_measure_alpha",
    "rate_partition",
    "rate_pd_prefix",
    "relative_entropy",
    "run_sweep",
    "sample_gem",
    "sample_partition_via_subordinator",
    "size_biased_permute",
    "stable_density",
    "StableSpec",
    "StopRule",
    "SweepConfig",
    "SweepResult",
    "tilted_stable_increment",
    "UnsupportedOrderError",
]
