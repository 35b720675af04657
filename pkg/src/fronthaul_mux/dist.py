"""Cluster user-count distribution.

The coverage area of one RRU is gamma distributed with shape ``a`` and rate
``b * lambda_r``; a cluster of ``K`` independent cells therefore has area
Gamma(K*a, rate b*lambda_r), and the user count given the area is Poisson.
Marginally the count is negative binomial with real-valued shape ``K*a`` and
success ratio ``lam = mu / (mu + b)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

DEFAULT_A = 3.5
DEFAULT_B = 3.5


@dataclass(frozen=True)
class ModelParams:
    """Stochastic-geometry parameters. ``mu`` and ``lam`` are derived."""

    lambda_u: float = 5.0
    lambda_r: float = 1.0
    a: float = DEFAULT_A
    b: float = DEFAULT_B
    mu: float = field(init=False)
    lam: float = field(init=False)

    def __post_init__(self):
        for name in ("lambda_u", "lambda_r", "a", "b"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.lambda_u < 0:
            raise ValueError(f"lambda_u must be >= 0, got {self.lambda_u}")
        if self.lambda_r <= 0:
            raise ValueError(f"lambda_r must be > 0, got {self.lambda_r}")
        if self.a <= 0 or self.b <= 0:
            raise ValueError(f"gamma constants must be > 0, got a={self.a}, b={self.b}")
        mu = self.lambda_u / self.lambda_r
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "lam", mu / (mu + self.b))

    @classmethod
    def from_mu(cls, mu: float, a: float = DEFAULT_A, b: float = DEFAULT_B) -> "ModelParams":
        return cls(lambda_u=mu, lambda_r=1.0, a=a, b=b)

    def shape(self, K: int) -> float:
        """Gamma shape ``K*a`` of the cluster area."""
        return K * self.a

    def as_dict(self) -> dict:
        return {
            "lambda_u": self.lambda_u,
            "lambda_r": self.lambda_r,
            "a": self.a,
            "b": self.b,
            "mu": self.mu,
            "lam": self.lam,
        }


@dataclass(frozen=True)
class ClusterConfig:
    K: int
    T: int

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"cluster size K must be an integer >= 1, got {self.K}")
        if int(self.T) != self.T or self.T < 0:
            raise ValueError(f"capacity T must be an integer >= 0, got {self.T}")

    @property
    def is_trivial(self) -> bool:
        return self.K == 1 and self.T == 1


def _check_K(K):
    if int(K) != K or K < 1:
        raise ValueError(f"cluster size K must be an integer >= 1, got {K}")


def log_pmf(n, K: int, params: ModelParams):
    """Natural log of P_K{N=n}; accepts a scalar or an integer array.

    Evaluated with log-gamma only, so it stays finite far past the point where
    Gamma(n + K*a) overflows a double. Returns ``-inf`` for impossible counts.
    """
    _check_K(K)
    n_arr = np.asarray(n, dtype=float)
    scalar = n_arr.ndim == 0
    n_arr = np.atleast_1d(n_arr)
    if np.any(n_arr < 0):
        raise ValueError("n must be >= 0")
    ka = params.shape(K)
    if params.mu == 0.0:
        out = np.where(n_arr == 0, 0.0, -np.inf)
    else:
        out = (
            ka * math.log(params.b)
            + n_arr * math.log(params.mu)
            + gammaln(n_arr + ka)
            - (ka + n_arr) * math.log(params.mu + params.b)
            - gammaln(ka)
            - gammaln(n_arr + 1.0)
        )
    return float(out[0]) if scalar else out


def pmf(n, K: int, params: ModelParams):
    return np.exp(log_pmf(n, K, params))


def mean_count(K: int, params: ModelParams) -> float:
    _check_K(K)
    return K * params.mu


def pmf_ratio_bound(n: int, K: int, params: ModelParams) -> float:
    """Supremum of P{N=m+1}/P{N=m} over all m >= n.

    The ratio lam*(m+Ka)/(m+1) is decreasing in m when Ka > 1 and increases
    towards lam otherwise.
    """
    ka = params.shape(K)
    r = params.lam * (n + ka) / (n + 1)
    return r if ka >= 1 else max(r, params.lam)


def truncation_point(K: int, params: ModelParams, tol: float = 1e-12) -> int:
    """First index N* past the mode with geometric tail bound below ``tol``.

    The omitted mass sum_{n > N*} P{N=n} is at most pmf(N*) * r / (1 - r) with
    r the ratio bound at N*.
    """
    _check_K(K)
    if params.mu == 0.0:
        return 0
    log_tol = math.log(tol)
    start = 0
    size = max(256, int(4 * mean_count(K, params)))
    while True:
        n = np.arange(start, start + size)
        lp = log_pmf(n, K, params)
        ka = params.shape(K)
        r = params.lam * (n + ka) / (n + 1)
        if ka < 1:
            r = np.maximum(r, params.lam)
        with np.errstate(divide="ignore"):
            log_tail = lp + np.log(r) - np.log1p(-np.minimum(r, 1.0))
        ok = (r < 1) & (log_tail < log_tol)
        hits = np.flatnonzero(ok)
        if hits.size:
            return int(n[hits[0]])
        start += size
        size *= 2


def pmf_table(K: int, params: ModelParams, tol: float = 1e-12, n_max: int | None = None):
    """Return ``(n, pmf)`` arrays for n = 0..N*, N* certified by :func:`truncation_point`."""
    if n_max is None:
        n_max = truncation_point(K, params, tol)
    n = np.arange(n_max + 1)
    return n, pmf(n, K, params)


def sample_count(K: int, params: ModelParams, rng: np.random.Generator, size=None):
    """Draw cluster user counts by composing the gamma area and Poisson count laws."""
    _check_K(K)
    if params.lambda_u == 0.0:
        return 0 if size is None else np.zeros(size, dtype=np.int64)
    area = rng.gamma(shape=params.shape(K), scale=1.0 / (params.b * params.lambda_r), size=size)
    counts = rng.poisson(params.lambda_u * area)
    return int(counts) if size is None else counts.astype(np.int64)
