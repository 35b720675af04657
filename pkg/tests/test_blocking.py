import math

import numpy as np
import pytest

from fronthaul_mux.blocking import (
    BoundDomainError,
    a_coefficient,
    blocking_lower_bound,
    blocking_probability,
    blocking_upper_bound,
    bound_ratio,
    bounds_valid,
    log_terms,
    term_ratio_factor,
    upper_ratio_constant,
)
from fronthaul_mux.dist import ModelParams

# pmf(41)/(41 (1-lam)^2) for K=5, mu=5, a=b=3.5; pmf(41) from the exact rational
# product form at 50 digits (see test_dist._rational_log_pmf)
LOWER_BOUND_K5_T40 = 0.00099383258243423680834


def test_term_ratio_matches_consecutive_terms(params):
    K, T = 5, 10
    n = np.arange(11, 51)
    direct = np.exp(log_terms(n + 1, K, T, params) - log_terms(n, K, T, params))
    np.testing.assert_allclose(term_ratio_factor(n, K, T, params), direct, rtol=1e-12)


def test_term_ratio_rejects_n_at_or_below_T(params):
    with pytest.raises(ValueError):
        term_ratio_factor(10, 5, 10, params)


def test_a_coefficient_hand_value(params):
    assert float(a_coefficient(3, 1, params)) == pytest.approx(1.21875, rel=1e-15)


@pytest.mark.parametrize("K", [1, 2, 5, 20])
def test_a_coefficient_bound(params, K):
    ka = params.shape(K)
    for T in range(1, 80):
        if not T > 2 / (ka - 2):
            continue
        n = np.arange(T + 1, T + 400)
        a_n = a_coefficient(n, K, params)
        top = (T + 1) * (T + ka + 1) / (T + 2) ** 2
        assert np.all(a_n > 1)
        assert np.all(a_n <= top * (1 + 1e-15))
        assert a_n[0] == pytest.approx(top, rel=1e-15)


@pytest.mark.parametrize("K", [1, 3, 20])
def test_zero_capacity_blocks_every_nonempty_cluster(params, K):
    expected = 1 - (1 - params.lam) ** (K * params.a)
    assert blocking_probability(K, 0, params).value == pytest.approx(expected, rel=1e-12)


def test_reference_capacity_brackets(params):
    assert blocking_probability(1, 8, params).value <= 0.05
    assert blocking_probability(1, 7, params).value > 0.05
    assert blocking_probability(5, 29, params).value <= 0.05
    assert blocking_probability(5, 28, params).value > 0.05


def test_series_against_naive_long_sum(params):
    K, T = 3, 10
    ka = K * params.a
    lmu, lmb, lb = math.log(params.mu), math.log(params.mu + params.b), math.log(params.b)
    total = 0.0
    for n in range(T + 1, T + 1 + 10**6):
        lp = ka * lb + n * lmu + math.lgamma(n + ka) - (ka + n) * lmb - math.lgamma(ka) - math.lgamma(n + 1)
        total += math.exp(lp) * (n - T) / n
    assert blocking_probability(K, T, params).value == pytest.approx(total, rel=1e-10)


def test_trivial_configuration_has_no_bounds(params):
    res = blocking_probability(1, 1, params)
    assert 0 < res.value < 1
    assert res.lower_bound is None and res.upper_bound is None
    with pytest.raises(BoundDomainError, match=r"T > 2/\(Ka-2\)"):
        blocking_lower_bound(1, 1, params)
    with pytest.raises(BoundDomainError):
        blocking_upper_bound(1, 1, params)


def test_lower_bound_hand_formula(params):
    assert blocking_lower_bound(5, 40, params) == pytest.approx(LOWER_BOUND_K5_T40, rel=1e-12)


def test_bounds_vanish_without_users():
    p = ModelParams(lambda_u=1e-9)
    res = blocking_probability(3, 5, p)
    assert res.value < 1e-40
    assert res.lower_bound < 1e-40
    assert ModelParams(lambda_u=0.0).lam == 0
    assert blocking_probability(3, 5, ModelParams(lambda_u=0.0)).value == 0.0


def _grid(params, ks, ts):
    for K in ks:
        for T in ts:
            if bounds_valid(K, T, params):
                yield K, T, blocking_probability(K, T, params)


def test_sandwich(params):
    checked_upper = 0
    for K, T, res in _grid(params, (1, 3, 5, 10), range(2, 61)):
        assert res.log_lower < res.log_value, (K, T)
        if res.log_upper is not None:
            assert res.log_value < res.log_upper, (K, T)
            checked_upper += 1
    assert checked_upper > 100


def test_upper_bound_absent_when_constant_reaches_one(params):
    assert upper_ratio_constant(20, 3, params) >= 1
    assert blocking_upper_bound(20, 3, params) is None
    res = blocking_probability(20, 3, params)
    assert res.upper_bound is None and 0 < res.value < 1


def test_vacuous_upper_bound_is_capped_at_one(params):
    res = blocking_probability(3, 10, params)
    assert res.log_upper > 0
    assert res.upper_bound == 1.0
    assert res.value < res.upper_bound


def test_ratio_is_algebraic_identity(params):
    for K, T, res in _grid(params, (1, 5, 10), range(3, 200, 7)):
        c = upper_ratio_constant(K, T, params)
        if c < 1:
            assert bound_ratio(K, T, params) == pytest.approx(((1 - c) / (1 - params.lam)) ** 2, rel=1e-10)


def test_ratio_tightens_with_capacity(params):
    ts = [t for t in range(3, 20001, 50) if upper_ratio_constant(5, t, params) < 1]
    ratios = [bound_ratio(5, t, params) for t in ts]
    assert all(x < y for x, y in zip(ratios, ratios[1:]))
    assert bound_ratio(5, 10**4, params) > 0.99


@pytest.mark.parametrize("K", [1, 3, 5, 10, 20])
def test_monotone_in_capacity(params, K):
    vals = [blocking_probability(K, T, params).log_value for T in range(0, 150)]
    assert all(x > y for x, y in zip(vals, vals[1:]))


@pytest.mark.parametrize(
    "t_bar",
    [
        pytest.param(
            4,
            marks=pytest.mark.xfail(
                strict=True,
                reason="below mu the curve dips under the large-K limit 1 - t_bar/mu = 0.2 and "
                "climbs back: P_b(K=10) = 0.18806 < P_b(K=20) = 0.18842",
            ),
        ),
        5,
        6,
        7,
    ],
)
def test_monotone_in_cluster_size(params, t_bar):
    vals = [blocking_probability(K, K * t_bar, params).value for K in (1, 3, 5, 10, 20)]
    assert all(x > y for x, y in zip(vals, vals[1:]))


@pytest.mark.parametrize("K,T", [(1, 8), (5, 29), (20, 3), (100, 480), (1, 200)])
def test_tail_certificate(params, K, T):
    res = blocking_probability(K, T, params)
    assert res.tail_bound < 1e-12 * max(res.value, 1e-300)
    tight = blocking_probability(K, T, params, rtol=1e-15)
    assert abs(tight.value - res.value) < 1e-11 * res.value
    assert tight.truncation_n >= res.truncation_n


def test_tiny_values_are_flagged(params):
    res = blocking_probability(5, 2000, params)
    assert res.underflow and res.value == 0.0
    assert math.isfinite(res.log_value) and res.log_value < math.log(1e-300)
    assert res.log_lower < res.log_value < res.log_upper
