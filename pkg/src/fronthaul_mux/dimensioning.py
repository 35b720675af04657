"""Minimum-capacity dimensioning, multiplexing gain, and large-cluster limits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .blocking import TINY, blocking_probability
from .dist import ModelParams


@dataclass(frozen=True)
class DimensioningResult:
    K: int
    p_threshold: float
    T_min: int
    t_bar: float
    gain: float


def _check_threshold(p_threshold: float):
    if not (0.0 < p_threshold < 1.0):
        raise ValueError(f"blocking threshold must lie in (0, 1), got {p_threshold}")
    if p_threshold < TINY:
        raise ValueError(
            f"blocking threshold {p_threshold:g} is below the resolvable floor {TINY:g}"
        )


def _meets(K: int, T: int, p_threshold: float, params: ModelParams) -> bool:
    return blocking_probability(K, T, params).value <= p_threshold


@lru_cache(maxsize=4096)
def min_capacity(K: int, p_threshold: float, params: ModelParams) -> int:
    """Smallest integer T with blocking probability <= ``p_threshold``.

    Blocking is strictly decreasing in T, so exponential doubling from T=1
    followed by bisection needs O(log T) series evaluations.
    """
    _check_threshold(p_threshold)
    if K < 1 or int(K) != K:
        raise ValueError(f"cluster size K must be an integer >= 1, got {K}")
    if _meets(K, 0, p_threshold, params):
        return 0
    lo, hi = 0, 1
    while not _meets(K, hi, p_threshold, params):
        lo, hi = hi, hi * 2
    # invariant: lo fails, hi meets
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _meets(K, mid, p_threshold, params):
            hi = mid
        else:
            lo = mid
    return hi


def gain(K: int, p_threshold: float, params: ModelParams) -> float:
    """Relative per-RRU capacity saving ``1 - T_K / (K T_1)``."""
    t1 = min_capacity(1, p_threshold, params)
    if t1 == 0:
        raise ValueError(f"T_1 is 0 at threshold {p_threshold}; gain is undefined")
    return 1.0 - min_capacity(K, p_threshold, params) / (K * t1)


def dimension(K: int, p_threshold: float, params: ModelParams) -> DimensioningResult:
    t_min = min_capacity(K, p_threshold, params)
    return DimensioningResult(
        K=K,
        p_threshold=p_threshold,
        T_min=t_min,
        t_bar=t_min / K,
        gain=gain(K, p_threshold, params),
    )


def asymptotic_blocking(t_bar: float, params: ModelParams) -> float:
    """Large-K blocking at per-RRU capacity ``t_bar``: ``max(0, 1 - t_bar/mu)``."""
    if t_bar < 0:
        raise ValueError(f"t_bar must be >= 0, got {t_bar}")
    if params.mu == 0.0:
        return 0.0
    return max(0.0, 1.0 - t_bar / params.mu)


def asymptotic_capacity_per_rru(p_threshold: float, params: ModelParams) -> float:
    if not (0.0 <= p_threshold < 1.0):
        raise ValueError(f"blocking threshold must lie in [0, 1), got {p_threshold}")
    return (1.0 - p_threshold) * params.mu


def asymptotic_gain(p_threshold: float, params: ModelParams) -> float:
    t1 = min_capacity(1, p_threshold, params)
    if t1 == 0:
        raise ValueError(f"T_1 is 0 at threshold {p_threshold}; gain is undefined")
    return 1.0 - asymptotic_capacity_per_rru(p_threshold, params) / t1


def decay_slope(K: int, params: ModelParams) -> float:
    """Limit of d ln(P_b) / d t_bar as T grows: ``K ln(lam)``.

    Per unit of T (not t_bar) the slope is :func:`decay_slope_per_capacity`.
    """
    if K < 1:
        raise ValueError(f"cluster size K must be >= 1, got {K}")
    return K * math.log(params.lam)


def decay_slope_per_capacity(params: ModelParams) -> float:
    """Limit of ln P_b(T+1) - ln P_b(T): ``ln(lam)``, independent of K."""
    return math.log(params.lam)
