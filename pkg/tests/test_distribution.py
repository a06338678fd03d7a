import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal
from scipy.integrate import quad

from lomaxfit.distribution import (
    LomaxParams,
    Sample,
    fisher_information_inverse,
    lomax_cdf,
    lomax_pdf,
    lomax_quantile,
    lomax_raw_moment,
    lomax_sample,
)
from lomaxfit.errors import DataError, DomainError, MomentError

sigmas = st.floats(1e-3, 1e3)
betas = st.floats(0.05, 50.0)
params = st.builds(LomaxParams, sigmas, betas)


@pytest.mark.parametrize("sigma,beta", [(0, 1), (-1, 1), (1, 0), (math.nan, 1), (1, math.inf), ("a", 1)])
def test_params_reject_invalid(sigma, beta):
    with pytest.raises(DomainError):
        LomaxParams(sigma, beta)


@pytest.mark.parametrize(
    "sigma,beta,x,expected", [(1, 1, 0, 1.0), (2, 3, 0, 1.5), (1, 1, 1, 0.25)]
)
def test_pdf_examples(sigma, beta, x, expected):
    assert lomax_pdf(LomaxParams(sigma, beta), x) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("sigma,beta,x,expected", [(1, 1, 0, 0.0), (1, 1, 1, 0.5), (2, 2, 2, 0.75)])
def test_cdf_examples(sigma, beta, x, expected):
    assert lomax_cdf(LomaxParams(sigma, beta), x) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("sigma,beta,u,expected", [(1, 1, 0.5, 1.0), (1, 1, 0.0, 0.0), (2, 2, 0.75, 2.0)])
def test_quantile_examples(sigma, beta, u, expected):
    assert lomax_quantile(LomaxParams(sigma, beta), u) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("bad", [-1.0, math.nan, math.inf])
def test_pdf_cdf_domain(bad):
    p = LomaxParams(1, 1)
    with pytest.raises(DomainError):
        lomax_pdf(p, bad)
    with pytest.raises(DomainError):
        lomax_cdf(p, bad)


@pytest.mark.parametrize("u", [-0.1, 1.0, 1.5, math.nan])
def test_quantile_domain(u):
    with pytest.raises(DomainError):
        lomax_quantile(LomaxParams(1, 1), u)


def test_vectorised_evaluation_matches_scalar():
    p = LomaxParams(3.0, 2.5)
    x = np.array([0.0, 0.1, 5.0, 1e4])
    assert_allclose(lomax_cdf(p, x), [lomax_cdf(p, v) for v in x], rtol=0, atol=0)
    assert_allclose(lomax_pdf(p, x), [lomax_pdf(p, v) for v in x], rtol=0, atol=0)


def test_cdf_small_x_keeps_precision():
    # F(x) ~ beta*x/sigma as x -> 0
    p = LomaxParams(1.0, 2.0)
    assert lomax_cdf(p, 1e-12) == pytest.approx(2e-12, rel=1e-9)


@given(params, st.floats(0.0, 1.0, exclude_max=True))
def test_quantile_cdf_roundtrip(p, u):
    x = lomax_quantile(p, u)
    assert abs(lomax_cdf(p, x) - u) <= 1e-12


@given(params, st.floats(1e-3, 1e3))
@settings(max_examples=100)
def test_pdf_is_derivative_of_cdf(p, t):
    x = t * p.sigma
    h = 1e-5 * max(x, p.sigma * 1e-3)
    lo = max(x - h, 0.0)
    fd = (lomax_cdf(p, x + h) - lomax_cdf(p, lo)) / (x + h - lo)
    pdf = lomax_pdf(p, x)
    # skip where the density underflows relative to the CDF's resolution
    if pdf * (x + h - lo) < 1e-9:
        return
    assert fd == pytest.approx(pdf, rel=1e-6)


@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0, 50.0])
@pytest.mark.parametrize("beta", [1.1, 1.5, 2.0, 2.1, 6.0])
def test_pdf_integrates_to_one(sigma, beta):
    p = LomaxParams(sigma, beta)
    total, err = quad(lambda x: lomax_pdf(p, x), 0, np.inf, epsabs=1e-12, epsrel=1e-12, limit=500)
    assert abs(total - 1.0) < 1e-8


def test_sampling_is_deterministic():
    p = LomaxParams(2.0, 3.0)
    a = lomax_sample(p, 1000, 42)
    b = lomax_sample(p, 1000, 42)
    assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, lomax_sample(p, 1000, 43).values)


def test_sample_mean_clt():
    p = LomaxParams(1.0, 2.1)
    n = 10**6
    x = lomax_sample(p, n, 2024).values
    # beta = 2.1 has a finite but heavy variance; use the empirical SE
    se = np.std(x, ddof=1) / math.sqrt(n)
    assert abs(np.mean(x) - 1.0 / 1.1) < 3 * se


def test_sample_edf_dkw():
    p = LomaxParams(1.5, 2.0)
    n = 10**5
    x = np.sort(lomax_sample(p, n, 7).values)
    f = lomax_cdf(p, x)
    j = np.arange(1, n + 1)
    d = max(np.max(j / n - f), np.max(f - (j - 1) / n))
    eps = math.sqrt(math.log(2 / 0.01) / (2 * n))  # DKW at 99%
    assert d < min(eps, 0.01)


@pytest.mark.parametrize("sigma,beta,r,expected", [(50, 6, 1, 10.0), (1, 3, 2, 1.0)])
def test_raw_moment_examples(sigma, beta, r, expected):
    assert lomax_raw_moment(LomaxParams(sigma, beta), r) == pytest.approx(expected, rel=1e-12)


def test_raw_moment_missing():
    with pytest.raises(MomentError):
        lomax_raw_moment(LomaxParams(1, 1), 1)


def test_raw_moment_matches_quadrature():
    p = LomaxParams(2.0, 7.5)
    for r in (1, 2, 3):
        q, _ = quad(lambda x: x**r * lomax_pdf(p, x), 0, np.inf, epsrel=1e-12, limit=500)
        assert lomax_raw_moment(p, r) == pytest.approx(q, rel=1e-8)


def test_raw_moment_large_beta_no_overflow():
    assert lomax_raw_moment(LomaxParams(1.0, 500.0), 3) == pytest.approx(6.0 / (499 * 498 * 497), rel=1e-10)


def test_fisher_inverse_examples():
    assert_allclose(fisher_information_inverse(LomaxParams(1, 1), 1), [[12, 6], [6, 4]], rtol=1e-15)
    assert_allclose(fisher_information_inverse(LomaxParams(2, 2), 10), [[7.2, 4.8], [4.8, 3.6]], rtol=1e-14)


def test_fisher_inverse_matches_inverted_information():
    # expected information per observation, inverted numerically
    s, b = 1.7, 3.3
    k = np.array([[b / (s * s * (b + 2)), -1 / (s * (b + 1))], [-1 / (s * (b + 1)), 1 / b**2]])
    assert_allclose(fisher_information_inverse(LomaxParams(s, b), 1), np.linalg.inv(k), rtol=1e-12)


@given(params, st.integers(1, 10_000))
def test_fisher_inverse_scaling_and_symmetry(p, n):
    one = fisher_information_inverse(p, 1)
    k = fisher_information_inverse(p, n)
    assert k[0, 1] == k[1, 0]
    assert_array_equal(k, one / n)


def test_sample_properties():
    s = Sample([3.0, 1.0, 2.0])
    assert s.n == 3
    assert_array_equal(s.sorted, [1.0, 2.0, 3.0])
    assert_array_equal(s.values, [3.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        s.values[0] = 5.0


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
def test_sorted_view_is_sorted_permutation(vals):
    s = Sample(vals)
    assert np.all(np.diff(s.sorted) >= 0)
    assert_array_equal(np.sort(s.values), s.sorted)


@pytest.mark.parametrize("vals", [[], [1.0, math.nan], [math.inf]])
def test_sample_rejects_bad_values(vals):
    with pytest.raises((DataError, DomainError)):
        Sample(vals)
