import math
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from fronthaul_mux.dist import (
    ClusterConfig,
    ModelParams,
    log_pmf,
    mean_count,
    pmf,
    pmf_table,
    sample_count,
    truncation_point,
)

from .conftest import K_GRID

# log P_3{N=10} at mu=5, a=b=3.5 from the exact rational product
# Gamma(n+Ka)/(Gamma(Ka) n!) = prod_{j<n} (Ka+j)/(j+1), times (b/(mu+b))^Ka at 50 digits
LOG_PMF_N10_K3 = -2.8365028760796639199


def _rational_log_pmf(n, K, mu, a, b):
    mp.mp.dps = 50
    ka = K * a
    ratio = Fraction(1)
    for j in range(n):
        ratio *= (ka + j) / (j + 1)
    ratio *= (mu / (mu + b)) ** n

    def q(x):
        return mp.mpf(x.numerator) / x.denominator

    return mp.log(q(ratio) * mp.power(q(b / (mu + b)), q(ka)))


def test_params_derived_fields():
    p = ModelParams(lambda_u=10.0, lambda_r=2.0)
    assert p.a == p.b == 3.5
    assert p.mu == 5.0
    assert p.lam == 5.0 / 8.5
    assert 0 < p.lam < 1


def test_params_reject_bad_values():
    with pytest.raises(ValueError):
        ModelParams(lambda_r=0.0)
    with pytest.raises(ValueError):
        ModelParams(lambda_u=-1.0)
    with pytest.raises(ValueError):
        ModelParams(a=0.0)


def test_zero_user_density_is_allowed():
    p = ModelParams(lambda_u=0.0)
    assert p.mu == 0 and p.lam == 0


def test_cluster_config():
    assert ClusterConfig(1, 1).is_trivial
    assert not ClusterConfig(5, 29).is_trivial
    with pytest.raises(ValueError):
        ClusterConfig(0, 3)
    with pytest.raises(ValueError):
        ClusterConfig(2, -1)


def test_log_pmf_at_zero(params):
    assert log_pmf(0, 1, params) == pytest.approx(3.5 * math.log(3.5 / 8.5), rel=1e-14)
    assert pmf(0, 1, params) == pytest.approx((3.5 / 8.5) ** 3.5, rel=1e-14)


def test_log_pmf_no_users():
    p = ModelParams(lambda_u=0.0)
    for K in (1, 7):
        assert log_pmf(0, K, p) == 0.0
        assert log_pmf(3, K, p) == -math.inf
    assert pmf(0, 4, p) == 1.0


def test_log_pmf_matches_rational_oracle(params):
    assert log_pmf(10, 3, params) == pytest.approx(LOG_PMF_N10_K3, rel=1e-12)


def test_rational_oracle_reproduces_frozen_value():
    got = _rational_log_pmf(10, 3, Fraction(5), Fraction(7, 2), Fraction(7, 2))
    assert float(got) == pytest.approx(LOG_PMF_N10_K3, rel=1e-15)


@pytest.mark.parametrize("K", [1, 3, 10, 50])
@pytest.mark.parametrize("n", [0, 1, 7, 40, 300])
def test_pmf_matches_negative_binomial_form(params, K, n):
    mp.mp.dps = 30
    ka = mp.mpf(K) * mp.mpf("3.5")
    lam = mp.mpf(5) / mp.mpf("8.5")
    expected = mp.binomial(n + ka - 1, n) * (1 - lam) ** ka * lam**n
    assert pmf(n, K, params) == pytest.approx(float(expected), rel=1e-12)


@pytest.mark.parametrize("K", K_GRID)
def test_normalization_with_certified_truncation(params, K):
    n, p = pmf_table(K, params)
    total = math.fsum(p)
    assert 1 - 1e-9 <= total <= 1 + 1e-12
    # the certified tail bound also holds against a much longer explicit sum
    far = pmf(np.arange(n[-1] + 1, n[-1] + 5000), K, params)
    assert math.fsum(far) < 1e-12


@pytest.mark.parametrize("K", K_GRID)
def test_mean_identity(params, K):
    n, p = pmf_table(K, params)
    assert math.fsum(n * p) == pytest.approx(mean_count(K, params), rel=1e-6)


def test_mean_count_values(params):
    assert mean_count(1, params) == 5
    assert mean_count(20, params) == 100


def test_log_space_robustness(params):
    n = np.arange(0, 10**6 + 1, 997)
    lp = log_pmf(n, 100, params)
    assert np.all(np.isfinite(lp))
    mode = int(np.argmax(lp))
    assert np.all(np.diff(lp[mode:]) < 0)
    assert log_pmf(10**6, 100, params) < -1e5


def test_truncation_point_is_past_mean(params):
    for K in K_GRID:
        assert truncation_point(K, params) > mean_count(K, params)


@settings(max_examples=200, deadline=None)
@given(
    n=st.integers(min_value=0, max_value=5000),
    K=st.integers(min_value=1, max_value=200),
    mu=st.floats(min_value=0.01, max_value=50),
)
def test_pmf_is_probability(n, K, mu):
    p = ModelParams.from_mu(mu)
    lp = log_pmf(n, K, p)
    assert np.isfinite(lp)
    assert 0.0 <= pmf(n, K, p) <= 1.0


def test_sample_count_without_users():
    p = ModelParams(lambda_u=0.0)
    rng = np.random.default_rng(0)
    assert sample_count(3, p, rng) == 0
    assert not sample_count(3, p, rng, size=100).any()


def test_sample_count_mean(params):
    rng = np.random.default_rng(2024)
    x = sample_count(3, params, rng, size=10**6)
    se = x.std(ddof=1) / math.sqrt(len(x))
    assert abs(x.mean() - 15) < 4 * se


def test_sample_count_matches_pmf(params):
    rng = np.random.default_rng(7)
    x = sample_count(1, params, rng, size=10**6)
    observed = np.bincount(np.minimum(x, 40), minlength=41)
    probs = pmf(np.arange(40), 1, params)
    probs = np.append(probs, 1.0 - probs.sum())
    _, pvalue = stats.chisquare(observed, probs * len(x))
    assert pvalue > 0.001


def test_sample_count_is_seeded(params):
    a = sample_count(5, params, np.random.default_rng(11), size=50)
    b = sample_count(5, params, np.random.default_rng(11), size=50)
    assert np.array_equal(a, b)
