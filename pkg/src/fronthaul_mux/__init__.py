"""Fronthaul statistical multiplexing gain of RRU clustering in C-RAN."""

__version__ = "0.1.0"

from .blocking import (
    BlockingResult,
    blocking_lower_bound,
    blocking_probability,
    blocking_upper_bound,
    term_ratio_factor,
)
from .dimensioning import (
    DimensioningResult,
    asymptotic_blocking,
    asymptotic_capacity_per_rru,
    asymptotic_gain,
    decay_slope,
    dimension,
    gain,
    min_capacity,
)
from .dist import ClusterConfig, ModelParams, log_pmf, mean_count, pmf, sample_count
from .spatial import McEstimate, SpatialScenario, Window, estimate_blocking, estimate_blocking_model
