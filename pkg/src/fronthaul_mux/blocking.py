"""User blocking probability of a cluster sharing a capacity-``T`` link.

The blocking probability is the expected blocked fraction of users,
``sum_{n>T} P{N=n} (n-T)/n``. The series is summed in log-space and truncated
at a point where a geometric tail bound certifies the omitted remainder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dist import ModelParams, log_pmf

# smallest value still reported as a plain double; below this ``underflow`` is set
TINY = 1e-300


class BoundDomainError(ValueError):
    """Raised when the closed-form bounds are requested outside T > 2/(Ka-2)."""


@dataclass(frozen=True)
class BlockingResult:
    K: int
    T: int
    value: float
    lower_bound: Optional[float]
    upper_bound: Optional[float]
    truncation_n: int
    tail_bound: float
    log_value: float = -math.inf
    log_lower: Optional[float] = None
    log_upper: Optional[float] = None
    underflow: bool = False

    @property
    def t_bar(self) -> float:
        return self.T / self.K


def _check(K, T):
    if int(K) != K or K < 1:
        raise ValueError(f"cluster size K must be an integer >= 1, got {K}")
    if int(T) != T or T < 0:
        raise ValueError(f"capacity T must be an integer >= 0, got {T}")


def a_coefficient(n, K: int, params: ModelParams):
    """``n (n + Ka) / (n + 1)^2``, the varying part of the term ratio."""
    ka = params.shape(K)
    n = np.asarray(n, dtype=float)
    return n * (n + ka) / (n + 1.0) ** 2


def term_ratio_factor(n, K: int, T: int, params: ModelParams):
    """Exact ratio term(n+1)/term(n) of the blocking series, for n > T."""
    _check(K, T)
    n_arr = np.asarray(n, dtype=float)
    if np.any(n_arr <= T):
        raise ValueError("term ratio is defined for n > T only")
    out = (n_arr + 1 - T) / (n_arr - T) * a_coefficient(n_arr, K, params) * params.lam
    return float(out) if out.ndim == 0 else out


def log_terms(n, K: int, T: int, params: ModelParams):
    """Log of the series terms P{N=n} (n-T)/n for n > T."""
    n = np.asarray(n, dtype=float)
    return log_pmf(n, K, params) + np.log(n - T) - np.log(n)


def _ratio_sup(n: np.ndarray, K: int, T: int, params: ModelParams) -> np.ndarray:
    # sup over m >= n of the term ratio. (m+1-T)/(m-T) always decreases; the
    # a-coefficient decreases once m >= Ka/(Ka-2) and stays below 1 for Ka <= 2.
    ka = params.shape(K)
    first = (n + 1 - T) / (n - T)
    a_n = a_coefficient(n, K, params)
    if ka > 2:
        sup_a = np.where(n >= ka / (ka - 2), a_n, np.inf)
    else:
        sup_a = np.ones_like(a_n)
    return first * sup_a * params.lam


def bounds_valid(K: int, T: int, params: ModelParams) -> bool:
    ka = params.shape(K)
    if K == 1 and T == 1:
        return False
    return ka > 2 and T > 2.0 / (ka - 2)


def _require_bounds(K, T, params):
    _check(K, T)
    if not bounds_valid(K, T, params):
        raise BoundDomainError(
            f"bounds need T > 2/(Ka-2) and (K, T) != (1, 1); got K={K}, T={T}, Ka={params.shape(K)}"
        )


def upper_ratio_constant(K: int, T: int, params: ModelParams) -> float:
    """``c = (T+1)(T+Ka+1) lam / (T+2)^2``, the largest term ratio past T+1."""
    ka = params.shape(K)
    return (T + 1) * (T + ka + 1) * params.lam / (T + 2) ** 2


def log_blocking_lower_bound(K: int, T: int, params: ModelParams) -> float:
    _require_bounds(K, T, params)
    if params.lam == 0.0:
        return -math.inf
    return log_pmf(T + 1, K, params) - math.log(T + 1) - 2.0 * math.log1p(-params.lam)


def log_blocking_upper_bound(K: int, T: int, params: ModelParams) -> Optional[float]:
    """Log of the upper bound, or None when c >= 1 (the geometric sum diverges)."""
    _require_bounds(K, T, params)
    c = upper_ratio_constant(K, T, params)
    if c >= 1.0:
        return None
    if params.lam == 0.0:
        return -math.inf
    return log_pmf(T + 1, K, params) - math.log(T + 1) - 2.0 * math.log1p(-c)


def blocking_lower_bound(K: int, T: int, params: ModelParams) -> float:
    return math.exp(log_blocking_lower_bound(K, T, params))


def blocking_upper_bound(K: int, T: int, params: ModelParams) -> Optional[float]:
    log_ub = log_blocking_upper_bound(K, T, params)
    return None if log_ub is None else math.exp(log_ub)


def log_upper_expression(K: int, T: int, params: ModelParams) -> Optional[float]:
    """Log of the upper-bound closed form evaluated for any c != 1.

    For c > 1 the expression is finite but no longer bounds anything; use
    :func:`log_blocking_upper_bound` when a certified bound is needed.
    """
    _require_bounds(K, T, params)
    c = upper_ratio_constant(K, T, params)
    if c == 1.0:
        return None
    if params.lam == 0.0:
        return -math.inf
    return log_pmf(T + 1, K, params) - math.log(T + 1) - 2.0 * math.log(abs(1.0 - c))


def bound_ratio(K: int, T: int, params: ModelParams, certified: bool = True) -> Optional[float]:
    """lower/upper, which reduces to ((1-c)/(1-lam))^2.

    With ``certified`` the ratio is None wherever the upper bound is absent;
    otherwise the closed forms are compared as expressions.
    """
    lo = log_blocking_lower_bound(K, T, params)
    up = log_blocking_upper_bound(K, T, params) if certified else log_upper_expression(K, T, params)
    if up is None or not math.isfinite(up):
        return None
    return math.exp(lo - up)


def _series(K: int, T: int, params: ModelParams, rtol: float):
    """Return (log_value, N*, log_tail) for the certified truncated series."""
    if params.lam == 0.0:
        return -math.inf, T, -math.inf
    log_rtol = math.log(rtol)
    start = T + 1
    size = max(256, int(2 * math.sqrt(K * params.mu + 1.0) * 10))
    n_all = np.empty(0)
    lt_all = np.empty(0)
    while True:
        n = np.arange(start, start + size, dtype=float)
        n_all = np.concatenate([n_all, n])
        lt_all = np.concatenate([lt_all, log_terms(n, K, T, params)])
        log_cum = np.logaddexp.accumulate(lt_all)
        r = _ratio_sup(n_all, K, T, params)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_tail = np.where(r < 1, lt_all + np.log(r) - np.log1p(-np.minimum(r, 1.0)), np.inf)
        ok = log_tail < log_rtol + log_cum
        hits = np.flatnonzero(ok)
        if hits.size:
            i = hits[0]
            return float(log_cum[i]), int(n_all[i]), float(log_tail[i])
        start += size
        size *= 2


def blocking_probability(K: int, T: int, params: ModelParams, rtol: float = 1e-12) -> BlockingResult:
    """Blocking probability with certified truncation and closed-form bounds.

    Bounds are attached only when ``bounds_valid``; the upper bound is left as
    None when its geometric constant reaches 1.
    """
    _check(K, T)
    log_value, n_star, log_tail = _series(K, T, params, rtol)
    value = math.exp(log_value)
    underflow = value < TINY and math.isfinite(log_value)
    if underflow:
        value = 0.0
    lower = upper = log_lo = log_up = None
    if bounds_valid(K, T, params):
        log_lo = log_blocking_lower_bound(K, T, params)
        log_up = log_blocking_upper_bound(K, T, params)
        lower = math.exp(log_lo)
        # a vacuous bound above 1 is reported as 1; log_upper keeps the raw value
        upper = None if log_up is None else min(1.0, math.exp(log_up))
    return BlockingResult(
        K=K,
        T=T,
        value=value,
        lower_bound=lower,
        upper_bound=upper,
        truncation_n=n_star,
        tail_bound=math.exp(log_tail),
        log_value=log_value,
        log_lower=log_lo,
        log_upper=log_up,
        underflow=underflow,
    )
