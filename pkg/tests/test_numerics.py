import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy.integrate import quad

from lomaxfit.distribution import LomaxParams, Sample, lomax_sample
from lomaxfit.errors import DegenerateSampleError, ObjectiveError, OptimizerError
from lomaxfit.numerics import (
    R_OPTIM_BFGS,
    KdeModel,
    QuasiNewtonSettings,
    edf,
    kde_eval,
    minimize_quasi_newton,
    minimize_scalar,
    numeric_gradient,
    silverman_bandwidth,
)


def test_scalar_quadratic():
    r = minimize_scalar(lambda x: (x - 3.0) ** 2, 0.0, 10.0, tol=1e-8)
    assert r.converged
    assert abs(r.argmin - 3.0) < 1e-6


def test_scalar_kink():
    r = minimize_scalar(lambda x: abs(x - 1.0), 0.0, 2.0)
    assert abs(r.argmin - 1.0) < 1e-6


def test_scalar_profile_likelihood_vs_grid():
    s = lomax_sample(LomaxParams(1.0, 2.0), 500, 11).values

    def nll(sig):
        b = s.size / np.sum(np.log1p(s / sig))
        return -(s.size * math.log(b) - s.size * math.log(sig) - (b + 1) * np.sum(np.log1p(s / sig)))

    grid = np.logspace(-2, 2, 100_000)
    # oracle: exhaustive log-spaced grid
    vals = np.array([nll(g) for g in grid])
    oracle = grid[np.argmin(vals)]
    r = minimize_scalar(nll, 0.01, 100.0)
    assert r.argmin == pytest.approx(oracle, rel=0.02)


def test_scalar_nonfinite_carries_point():
    with pytest.raises(OptimizerError) as info:
        minimize_scalar(lambda x: math.nan if x > 0.5 else x, 0.0, 1.0)
    assert info.value.point is not None


@given(st.floats(-50, 50), st.floats(0.1, 10))
@settings(max_examples=50)
def test_scalar_unimodal_within_tol(c, w):
    r = minimize_scalar(lambda x: math.cosh((x - c) / w), c - 60, c + 60, tol=1e-9)
    assert abs(r.argmin - c) < 1e-6 * max(1.0, w)
    assert c - 60 <= r.argmin <= c + 60


def test_qn_quadratic_bowl():
    r = minimize_quasi_newton(lambda v: (v[0] - 1) ** 2 + (v[1] + 2) ** 2, [0.0, 0.0])
    assert r.converged
    assert_allclose(r.argmin, [1.0, -2.0], atol=1e-5)
    assert r.argmin.shape == (2,)


def test_qn_rosenbrock():
    def rosen(v):
        return 100 * (v[1] - v[0] ** 2) ** 2 + (1 - v[0]) ** 2

    r = minimize_quasi_newton(rosen, [-1.2, 1.0], max_iter=200)
    assert r.iterations <= 200
    assert_allclose(r.argmin, [1.0, 1.0], atol=1e-3)


def test_qn_constant():
    r = minimize_quasi_newton(lambda v: 4.0, [0.3, -7.0])
    assert r.converged
    assert_allclose(r.argmin, [0.3, -7.0])
    assert r.gradient_norm < 1e-12


def test_qn_iteration_cap_reported():
    def rosen(v):
        return 100 * (v[1] - v[0] ** 2) ** 2 + (1 - v[0]) ** 2

    r = minimize_quasi_newton(rosen, [-1.2, 1.0], max_iter=3)
    assert not r.converged
    assert "iteration" in r.message


def test_qn_nonfinite_start_fails():
    with pytest.raises(OptimizerError):
        minimize_quasi_newton(lambda v: math.inf, [1.0, 1.0])


def test_qn_backtracks_over_infinite_region():
    # infinite for x < 0.5; minimum at x = 1
    def f(v):
        return math.inf if v[0] < 0.5 else (v[0] - 1.0) ** 2 + v[1] ** 2

    r = minimize_quasi_newton(f, [3.0, 2.0])
    assert r.converged
    assert_allclose(r.argmin, [1.0, 0.0], atol=1e-5)


def test_r_optim_replay_quadratic():
    # R: optim(c(0,0), function(p) (p[1]-1)^2 + (p[2]+2)^2, method="BFGS")
    r = minimize_quasi_newton(lambda v: (v[0] - 1) ** 2 + (v[1] + 2) ** 2, [0.0, 0.0], settings=R_OPTIM_BFGS)
    assert_allclose(r.argmin, [1.0, -2.0], atol=1e-6)
    assert r.converged


def test_settings_override():
    cfg = QuasiNewtonSettings(tol=1e-3, max_iter=5)
    r = minimize_quasi_newton(lambda v: (v[0] - 2) ** 4 + v[1] ** 2, [0.0, 1.0], settings=cfg)
    assert r.iterations <= 5


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.floats(-2, 2), st.floats(-2, 2))
@settings(max_examples=50)
def test_numeric_gradient_polynomial(c, x, y):
    a, b, d = c

    def f(v):
        return a * v[0] ** 3 + b * v[0] * v[1] ** 2 + d * v[1] + v[0] ** 2

    g = numeric_gradient(f, [x, y])
    exact = np.array([3 * a * x * x + b * y * y + 2 * x, 2 * b * x * y + d])
    scale = max(1.0, np.max(np.abs(exact)))
    assert_allclose(g, exact, rtol=1e-6, atol=1e-6 * scale)


def test_numeric_gradient_nonfinite():
    with pytest.raises(ObjectiveError):
        numeric_gradient(lambda v: math.inf if v[0] < 0 else v[0], [0.0])


@pytest.mark.parametrize("x,expected", [(2, 2 / 3), (0.5, 0.0), (99, 1.0)])
def test_edf_examples(x, expected):
    assert edf(Sample([1, 2, 3]), x) == pytest.approx(expected)


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=40), st.lists(st.floats(-200, 200), min_size=2, max_size=20))
def test_edf_monotone_lattice(vals, xs):
    s = Sample(vals)
    xs = np.sort(xs)
    e = edf(s, xs)
    assert np.all(np.diff(e) >= 0)
    assert_allclose(e * s.n, np.round(e * s.n), atol=1e-9)
    # right-continuity: value at each data point counts the point itself
    for v in s.sorted:
        assert edf(s, v) == np.count_nonzero(s.sorted <= v) / s.n


def test_silverman_example():
    assert silverman_bandwidth(Sample([1, 2, 3])) == pytest.approx(0.9 * 3 ** -0.2 / 1.34, rel=1e-12)
    assert silverman_bandwidth(Sample([1, 2, 3])) == pytest.approx(0.5392, abs=1e-4)


def test_silverman_degenerate():
    with pytest.raises(DegenerateSampleError):
        silverman_bandwidth(Sample([5, 5, 5, 5]))


def test_silverman_zero_iqr_falls_back_to_sd():
    s = Sample([1, 1, 1, 1, 1, 1, 1, 9])
    assert silverman_bandwidth(s) == pytest.approx(0.9 * np.std(s.values, ddof=1) * 8 ** -0.2)


@given(st.lists(st.floats(0, 100), min_size=3, max_size=30, unique=True), st.floats(0.01, 100))
def test_silverman_scales(vals, c):
    s = Sample(vals)
    assert silverman_bandwidth(s.scaled(c)) == pytest.approx(c * silverman_bandwidth(s), rel=1e-9)


def test_kde_examples():
    assert kde_eval(KdeModel(Sample([0.0]), 1.0), 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)
    assert kde_eval(KdeModel(Sample([-1.0, 1.0]), 1.0), 0.0) == pytest.approx(0.24197072451914337, rel=1e-12)


def test_kde_integrates_to_one():
    s = lomax_sample(LomaxParams(1.0, 3.0), 200, 5)
    m = KdeModel.from_sample(s)
    h = m.bandwidth
    total, _ = quad(lambda x: kde_eval(m, x), s.sorted[0] - 10 * h, s.sorted[-1] + 10 * h,
                    limit=2000, points=s.sorted[::10].tolist(), epsabs=1e-10)
    assert abs(total - 1.0) < 1e-6


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=20), st.floats(-50, 50), st.floats(-20, 20))
def test_kde_translation(vals, c, x):
    a = KdeModel(Sample(vals), 0.7)
    b = KdeModel(Sample(np.asarray(vals) + c), 0.7)
    assert kde_eval(b, x + c) == pytest.approx(kde_eval(a, x), abs=1e-12)


def test_kde_cached_order_statistics():
    s = lomax_sample(LomaxParams(1.0, 3.0), 50, 1)
    m = KdeModel.from_sample(s)
    v = m.at_order_statistics()
    assert v is m.at_order_statistics()
    assert_allclose(v, kde_eval(m, s.sorted), rtol=0, atol=0)


def test_kde_chunking_exact():
    data = Sample(np.linspace(0, 1, 3000))
    m = KdeModel(data, 0.1)
    x = np.linspace(-0.5, 1.5, 1500)
    direct = np.exp(-0.5 * ((x[:, None] - data.values[None, :]) / 0.1) ** 2).sum(1) / (3000 * 0.1 * math.sqrt(2 * math.pi))
    assert_allclose(kde_eval(m, x), direct, rtol=1e-12)
