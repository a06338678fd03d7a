"""Optimisation and density-estimation helpers used by the estimators."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize as _opt

from .distribution import Sample
from .errors import DegenerateSampleError, DomainError, ObjectiveError, OptimizerError

__all__ = [
    "ScalarMinResult",
    "MultiMinResult",
    "QuasiNewtonSettings",
    "DEFAULT_QN",
    "R_OPTIM_BFGS",
    "minimize_scalar",
    "minimize_quasi_newton",
    "numeric_gradient",
    "edf",
    "silverman_bandwidth",
    "KdeModel",
    "kde_eval",
]

_EPS = np.finfo(float).eps
_CBRT_EPS = _EPS ** (1.0 / 3.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ScalarMinResult:
    argmin: float
    value: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class MultiMinResult:
    argmin: np.ndarray
    value: float
    gradient_norm: float
    iterations: int
    converged: bool
    message: str = ""
    n_evals: int = 0


def minimize_scalar(f, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 500) -> ScalarMinResult:
    """Bounded Brent minimisation (golden section with parabolic steps).

    Raises
    ------
    OptimizerError
        If ``f`` is non-finite at any probed abscissa; ``err.point`` holds it.
    """
    lo, hi = float(lo), float(hi)
    if not lo < hi:
        raise DomainError(f"need lo < hi, got [{lo}, {hi}]")

    def wrapped(x):
        v = f(x)
        if not np.isfinite(v):
            raise OptimizerError(f"objective is non-finite at x={x!r}", point=float(x))
        return v

    res = _opt.minimize_scalar(
        wrapped, bounds=(lo, hi), method="bounded", options={"xatol": tol, "maxiter": max_iter}
    )
    return ScalarMinResult(float(res.x), float(res.fun), int(res.nit), bool(res.success))


@dataclass(frozen=True)
class QuasiNewtonSettings:
    """Tuning knobs for :func:`minimize_quasi_newton`.

    ``grad_step=None`` selects the relative step ``cbrt(eps) * max(1, |x_i|)``;
    a number selects a fixed absolute step. ``ftol`` enables a stop on small
    relative change in the objective. ``change_ref`` is the offset used when
    deciding that a trial step no longer moves the iterate.
    """

    tol: float = 1e-6
    max_iter: int = 200
    step_shrink: float = 0.5
    armijo: float = 1e-4
    grad_step: float | None = None
    ftol: float | None = None
    change_ref: float = 0.0


DEFAULT_QN = QuasiNewtonSettings()

# Defaults of R's optim(method = "BFGS"): ndeps = 1e-3, maxit = 100,
# reltol = sqrt(eps), stepredn = 0.2, acctol = 1e-4, reltest = 10.
R_OPTIM_BFGS = QuasiNewtonSettings(
    tol=0.0,
    max_iter=100,
    step_shrink=0.2,
    armijo=1e-4,
    grad_step=1e-3,
    ftol=math.sqrt(_EPS),
    change_ref=10.0,
)


def numeric_gradient(f, x, step=None) -> np.ndarray:
    """Central-difference gradient of ``f`` at ``x``."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = _CBRT_EPS * max(1.0, abs(x[i])) if step is None else step
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        fp, fm = f(xp), f(xm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise ObjectiveError(f"non-finite value in finite-difference gradient near {x.tolist()}", point=x.copy())
        g[i] = (fp - fm) / (xp[i] - xm[i]) if step is None else (fp - fm) / (2.0 * h)
    return g


def minimize_quasi_newton(f, x0, tol=None, max_iter=None, settings: QuasiNewtonSettings = DEFAULT_QN) -> MultiMinResult:
    """BFGS with inverse-Hessian updates and a backtracking line search.

    The control flow follows the classic variable-metric routine of Nash:
    the inverse Hessian is reset to the identity whenever the update would
    lose positive definiteness or the search direction points uphill, and
    the search ends when a freshly reset direction makes no progress.
    Ending that way counts as convergence; exhausting ``max_iter`` does not.

    Raises
    ------
    OptimizerError
        If ``f(x0)`` is not finite.
    ObjectiveError
        If a finite-difference gradient cannot be formed.
    """
    cfg = settings
    tol = cfg.tol if tol is None else tol
    max_iter = cfg.max_iter if max_iter is None else max_iter
    b = np.array(x0, dtype=float).ravel()
    n = b.size
    n_evals = 0

    def fn(x):
        nonlocal n_evals
        n_evals += 1
        v = f(x)
        return float(v) if np.isfinite(v) else math.inf

    fval = fn(b)
    if not math.isfinite(fval):
        raise OptimizerError(f"objective is non-finite at the starting point {b.tolist()}", point=b.copy())
    fmin = fval

    def grad(x):
        nonlocal n_evals
        n_evals += 2 * n
        return numeric_gradient(f, x, cfg.grad_step)

    g = grad(b)
    gradcount = 1
    it = 1
    ilast = gradcount
    gnorm = float(np.linalg.norm(g))
    if gnorm <= tol:
        return MultiMinResult(b, fmin, gnorm, it, True, "gradient below tolerance", n_evals)

    B = np.eye(n)
    while True:
        if ilast == gradcount:
            B = np.eye(n)
        X = b.copy()
        c = g.copy()
        t = -(B @ g)
        gradproj = float(t @ g)
        if gradproj < 0.0:
            step = 1.0
            accpoint = False
            while True:
                b = X + step * t
                count = int(np.sum(cfg.change_ref + X == cfg.change_ref + b))
                if count < n:
                    fval = fn(b)
                    accpoint = math.isfinite(fval) and fval <= fmin + gradproj * step * cfg.armijo
                    if not accpoint:
                        step *= cfg.step_shrink
                if count == n or accpoint:
                    break
            if cfg.ftol is not None:
                enough = abs(fval - fmin) > cfg.ftol * (abs(fmin) + cfg.ftol)
                if not enough:
                    count = n
                    fmin = fval
            if count < n:
                fmin = fval
                g = grad(b)
                gradcount += 1
                it += 1
                gnorm = float(np.linalg.norm(g))
                if gnorm <= tol:
                    return MultiMinResult(b, fmin, gnorm, it, True, "gradient below tolerance", n_evals)
                t = step * t
                c = g - c
                d1 = float(t @ c)
                if d1 > 0.0:
                    Bc = B @ c
                    d2 = 1.0 + float(Bc @ c) / d1
                    B = B + (d2 * np.outer(t, t) - np.outer(Bc, t) - np.outer(t, Bc)) / d1
                else:
                    ilast = gradcount
            else:
                if ilast < gradcount:
                    count = 0
                    ilast = gradcount
        else:
            count = 0
            if ilast == gradcount:
                count = n
            else:
                ilast = gradcount
        if it >= max_iter:
            if not np.isfinite(fmin):
                fmin = math.inf
            return MultiMinResult(b, fmin, gnorm, it, False, "iteration limit reached", n_evals)
        if gradcount - ilast > 2 * n:
            ilast = gradcount
        if count == n and ilast == gradcount:
            break
    return MultiMinResult(b, fmin, gnorm, it, True, "no further descent", n_evals)


def edf(s: Sample, x):
    """Right-continuous empirical CDF ``#{X_i <= x} / n``."""
    out = np.searchsorted(s.sorted, x, side="right") / s.n
    return float(out) if np.ndim(x) == 0 else out


def silverman_bandwidth(s: Sample) -> float:
    """``0.9 * n**-0.2 * min(sd, IQR / 1.34)`` with type-7 quartiles.

    A zero IQR falls back to the standard deviation alone.
    """
    if s.n < 2:
        raise DegenerateSampleError("bandwidth needs at least two observations")
    sd = float(np.std(s.sorted, ddof=1))
    if not sd > 0.0:
        raise DegenerateSampleError("sample has zero spread")
    q1, q3 = np.quantile(s.sorted, [0.25, 0.75])
    iqr = float(q3 - q1)
    spread = min(sd, iqr / 1.34) if iqr > 0.0 else sd
    return 0.9 * spread * s.n ** (-0.2)


@dataclass(frozen=True)
class KdeModel:
    """Gaussian kernel density estimate over ``data`` with a fixed bandwidth."""

    data: Sample
    bandwidth: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        h = float(self.bandwidth)
        if not (math.isfinite(h) and h > 0.0):
            raise DomainError(f"bandwidth must be > 0, got {self.bandwidth!r}")
        object.__setattr__(self, "bandwidth", h)

    @classmethod
    def from_sample(cls, s: Sample) -> "KdeModel":
        return cls(s, silverman_bandwidth(s))

    def at_order_statistics(self) -> np.ndarray:
        """Density at each order statistic ``X_{j:n}`` (computed once, then cached)."""
        if "sorted" not in self._cache:
            vals = kde_eval(self, self.data.sorted)
            vals.flags.writeable = False
            self._cache["sorted"] = vals
        return self._cache["sorted"]


def kde_eval(m: KdeModel, x):
    """``(1 / (n h)) * sum_i phi((x - X_i) / h)`` with ``phi`` the standard normal density."""
    pts = np.atleast_1d(np.asarray(x, dtype=float))
    data = m.data.sorted
    h = m.bandwidth
    out = np.empty(pts.size)
    # bounded memory for large n
    chunk = max(1, 2_000_000 // max(data.size, 1))
    for start in range(0, pts.size, chunk):
        z = (pts[start:start + chunk, None] - data[None, :]) / h
        out[start:start + chunk] = np.exp(-0.5 * z * z).sum(axis=1)
    out *= _INV_SQRT_2PI / (data.size * h)
    return float(out[0]) if np.ndim(x) == 0 else out
