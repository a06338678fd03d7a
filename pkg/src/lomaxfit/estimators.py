"""Ten estimators of the Lomax scale and shape.

Every estimator maps a :class:`~lomaxfit.distribution.Sample` to an
:class:`EstimateResult`. Numerical failure is reported through
``converged=False`` plus a reason string; estimators only raise for
violated preconditions (too few points, negative data).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize as _opt

from .distribution import LomaxParams, Sample, fisher_information_inverse
from .errors import DomainError, LomaxError, ObjectiveError, OptimizerError
from .numerics import (
    R_OPTIM_BFGS,
    KdeModel,
    QuasiNewtonSettings,
    kde_eval,
    minimize_quasi_newton,
    minimize_scalar,
)

__all__ = [
    "Method",
    "DistanceKind",
    "EstimateResult",
    "DistanceSpec",
    "OPTIMIZERS",
    "estimate_mme",
    "sample_l_moments",
    "estimate_lme",
    "pwm_estimates",
    "estimate_pwme",
    "profile_neg_loglik",
    "log_likelihood",
    "estimate_mle",
    "mle_bias",
    "estimate_mle_bias_corrected",
    "mde_objective",
    "estimate_mde",
    "fit",
    "fit_all",
]


class Method(str, enum.Enum):
    MME = "MME"
    LME = "LME"
    PWME = "PWME"
    MLE = "MLE"
    MLE_B = "MLE_B"
    MDE_CVM = "MDE_CVM"
    MDE_SD = "MDE_SD"
    MDE_KL = "MDE_KL"
    MDE_CHI2 = "MDE_CHI2"
    MDE_TV = "MDE_TV"

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def parse(cls, text: str) -> "Method":
        key = text.strip().upper().replace(".", "_").replace("-", "_")
        key = _ALIASES.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise DomainError(f"unknown method {text!r}; choose from {', '.join(m.value for m in cls)}") from None


_LABELS = {
    Method.MME: "MME",
    Method.LME: "LME",
    Method.PWME: "PWM",
    Method.MLE: "MLE",
    Method.MLE_B: "MLE.b",
    Method.MDE_CVM: "MDE.CvM",
    Method.MDE_SD: "MDE.SD",
    Method.MDE_KL: "MDE.KL",
    Method.MDE_CHI2: "MDE.chi2",
    Method.MDE_TV: "MDE.TV",
}
_ALIASES = {"PWM": "PWME", "MLEB": "MLE_B", "CVM": "MDE_CVM", "SD": "MDE_SD", "KL": "MDE_KL",
            "CHI2": "MDE_CHI2", "TV": "MDE_TV", "MDE_CS": "MDE_CHI2"}


class DistanceKind(str, enum.Enum):
    CVM = "CVM"
    SD = "SD"
    KL = "KL"
    CHI2 = "CHI2"
    TV = "TV"

    @property
    def needs_kde(self) -> bool:
        return self in (DistanceKind.KL, DistanceKind.CHI2, DistanceKind.TV)

    @property
    def method(self) -> Method:
        return Method("MDE_" + self.value)


@dataclass(frozen=True)
class EstimateResult:
    """Outcome of one estimator on one sample.

    ``params`` is a valid :class:`LomaxParams` whenever ``converged`` is true.
    ``raw`` keeps the unvalidated ``(sigma, beta)`` pair when one was computed,
    which helps diagnose failures such as negative moment inversions.
    ``reason`` explains a failure, or carries a note on a success.
    """

    method: Method
    params: LomaxParams | None
    converged: bool
    reason: str | None = None
    objective_value: float | None = None
    iterations: int | None = None
    raw: tuple[float, float] | None = None

    @property
    def sigma(self) -> float:
        return self.params.sigma if self.params is not None else math.nan

    @property
    def beta(self) -> float:
        return self.params.beta if self.params is not None else math.nan

    def as_dict(self) -> dict:
        return {
            "method": self.method.value,
            "label": self.method.label,
            "sigma": None if self.params is None else self.params.sigma,
            "beta": None if self.params is None else self.params.beta,
            "converged": self.converged,
            "reason": self.reason,
            "objective_value": self.objective_value,
            "iterations": self.iterations,
        }


def _result(method, sigma, beta, failure_reason, **extra) -> EstimateResult:
    """Validate a raw ``(sigma, beta)`` pair into a result."""
    raw = (float(sigma), float(beta))
    if all(math.isfinite(v) and v > 0.0 for v in raw):
        return EstimateResult(method, LomaxParams(*raw), True, raw=raw, **extra)
    extra.pop("reason", None)
    return EstimateResult(method, None, False, reason=failure_reason, raw=raw, **extra)


def _require_n(s: Sample, n_min: int = 2):
    if s.n < n_min:
        raise DomainError(f"need at least {n_min} observations, got {s.n}")


# ---------------------------------------------------------------- moments


def estimate_mme(s: Sample) -> EstimateResult:
    """Method of moments from the first two raw sample moments."""
    _require_n(s)
    x = s.sorted
    m1 = float(np.mean(x))
    m2 = float(np.mean(x * x))
    denom = m2 - 2.0 * m1 * m1
    if not denom > 0.0:
        return EstimateResult(Method.MME, None, False, reason="moment inversion invalid")
    beta = (2.0 * m2 - 2.0 * m1 * m1) / denom
    return _result(Method.MME, m1 * (beta - 1.0), beta, "moment inversion invalid")


def sample_l_moments(s: Sample) -> tuple[float, float]:
    """First two sample L-moments ``(l1, l2)``.

    ``l2 = M100 - 2 M101`` from the unbiased probability-weighted moments,
    which puts weight ``(2j - n - 1) / (n (n - 1))`` on ``X_{j:n}`` and equals
    half the mean absolute pairwise difference.
    """
    m100, m101 = pwm_estimates(s)
    return m100, m100 - 2.0 * m101


def _invert_l_moments(method: Method, l1: float, l2: float, reason: str) -> EstimateResult:
    denom = 2.0 * l2 - l1
    if denom == 0.0:
        return EstimateResult(method, None, False, reason=reason)
    return _result(method, (l1 * l1 - l1 * l2) / denom, l2 / denom, reason)


def estimate_lme(s: Sample) -> EstimateResult:
    l1, l2 = sample_l_moments(s)
    return _invert_l_moments(Method.LME, l1, l2, "L-moment inversion invalid")


def pwm_estimates(s: Sample) -> tuple[float, float]:
    """Unbiased estimates of ``M_{1,0,0}`` and ``M_{1,0,1}``."""
    _require_n(s)
    n = s.n
    x = s.sorted
    j = np.arange(1, n + 1, dtype=float)
    m100 = float(np.mean(x))
    m101 = float(np.dot((n - j) / (n - 1.0), x) / n)
    return m100, m101


def estimate_pwme(s: Sample) -> EstimateResult:
    """PWM estimator.

    ``beta = (2 M101 - M100) / (4 M101 - M100)`` and
    ``sigma = 2 M100 M101 / (M100 - 4 M101)``. These are the L-moment
    formulas under ``l1 = M100``, ``l2 = M100 - 2 M101``; evaluating them
    through that substitution keeps the two estimators bit-identical.
    """
    m100, m101 = pwm_estimates(s)
    return _invert_l_moments(Method.PWME, m100, m100 - 2.0 * m101, "PWM inversion invalid")


# ------------------------------------------------------------- likelihood


def log_likelihood(s: Sample, p: LomaxParams) -> float:
    n = s.n
    return float(n * math.log(p.beta) - n * math.log(p.sigma) - (1.0 + p.beta) * np.sum(np.log1p(s.sorted / p.sigma)))


def profile_neg_loglik(s: Sample, sigma: float) -> float:
    """Negative log-likelihood with the shape concentrated out.

    For fixed ``sigma`` the shape maximising the likelihood is
    ``n / sum(log(1 + X_i / sigma))``; substituting it leaves a function of
    ``sigma`` alone.
    """
    if not (math.isfinite(sigma) and sigma > 0.0):
        raise DomainError(f"sigma must be finite and > 0, got {sigma!r}")
    val = _profile(s.sorted, sigma)
    if not math.isfinite(val):
        raise ObjectiveError(f"profile likelihood is not finite at sigma={sigma!r}", point=sigma)
    return val


def _profile(x: np.ndarray, sigma: float) -> float:
    n = x.size
    t = float(np.mean(np.log1p(x / sigma)))
    if not t > 0.0:
        return math.inf
    return n * (math.log(t) + math.log(sigma) + t + 1.0)


_MLE_BRACKET = (1e-6, 1e6)
_MLE_EXPANSIONS = 3
_BOUNDARY_MARGIN = 1e-4  # in log(sigma) units


def estimate_mle(s: Sample) -> EstimateResult:
    """Maximum likelihood via the one-dimensional profile in ``sigma``.

    The profile is minimised over ``log(sigma)`` on a bracket that starts at
    ``[1e-6, 1e6]`` times the sample mean and widens tenfold on whichever side
    the minimum touches, at most three times. A minimum that stays on the
    boundary, or that is no better than the exponential limit reached as
    ``sigma -> inf``, is reported as non-convergence.
    """
    _require_n(s)
    s.require_nonnegative()
    x = s.sorted
    xbar = float(np.mean(x))
    if not xbar > 0.0:
        return EstimateResult(Method.MLE, None, False, reason="all observations are zero")

    def f(u):
        return _profile(x, math.exp(u))

    lo = math.log(_MLE_BRACKET[0] * xbar)
    hi = math.log(_MLE_BRACKET[1] * xbar)
    iterations = 0
    for attempt in range(_MLE_EXPANSIONS + 1):
        try:
            res = minimize_scalar(f, lo, hi, tol=1e-10)
        except OptimizerError as exc:
            return EstimateResult(Method.MLE, None, False, reason=f"profile likelihood not finite: {exc}")
        iterations += res.iterations
        at_lo = res.argmin - lo < _BOUNDARY_MARGIN
        at_hi = hi - res.argmin < _BOUNDARY_MARGIN
        if not (at_lo or at_hi):
            break
        if attempt == _MLE_EXPANSIONS:
            return EstimateResult(Method.MLE, None, False, reason="profile likelihood monotone in bracket",
                                  iterations=iterations)
        if at_lo:
            lo -= math.log(10.0)
        if at_hi:
            hi += math.log(10.0)

    # sigma -> inf gives the exponential likelihood; an optimum that does not
    # beat it sits on a plateau rather than at an interior maximum
    exp_limit = x.size * (math.log(xbar) + 1.0)
    if not res.value < exp_limit - 1e-9 * max(1.0, abs(exp_limit)):
        return EstimateResult(Method.MLE, None, False, reason="profile likelihood monotone in bracket",
                              objective_value=res.value, iterations=iterations)

    sigma = math.exp(res.argmin)
    beta = x.size / float(np.sum(np.log1p(x / sigma)))
    out = _result(Method.MLE, sigma, beta, "non-positive estimate", objective_value=res.value,
                  iterations=iterations)
    if out.converged and not res.converged:
        return EstimateResult(Method.MLE, None, False, reason="scalar minimiser did not converge",
                              raw=out.raw, iterations=iterations)
    return out


def mle_bias(p: LomaxParams, n: int) -> np.ndarray:
    """Leading-order bias of the ``(sigma, beta)`` MLE, ``K^-1 A vec(K^-1)``."""
    kinv = fisher_information_inverse(p, n)
    s, b = p.sigma, p.beta
    a = n * np.array(
        [
            [2.0 * b / (s**3 * (b + 2.0) * (b + 3.0)), -1.0 / (s**2 * (b + 1.0) * (b + 2.0)),
             b / (s**2 * (b + 2.0) ** 2), -1.0 / (s * (b + 1.0) ** 2)],
            [-1.0 / (s**2 * (b + 1.0) * (b + 2.0)), 0.0,
             -1.0 / (s * (b + 1.0) ** 2), 1.0 / b**3],
        ]
    )
    return kinv @ a @ kinv.flatten(order="F")


def estimate_mle_bias_corrected(s: Sample, mle: EstimateResult | None = None) -> EstimateResult:
    """MLE minus its estimated leading-order bias.

    Pass a precomputed ``mle`` result to avoid refitting.
    """
    if mle is None:
        mle = estimate_mle(s)
    if not mle.converged:
        return EstimateResult(Method.MLE_B, None, False, reason=f"MLE failed: {mle.reason}")
    bias = mle_bias(mle.params, s.n)
    return _result(Method.MLE_B, mle.sigma - bias[0], mle.beta - bias[1], "bias correction overshoot",
                   iterations=mle.iterations)


# ------------------------------------------------------ minimum distance


@dataclass(frozen=True)
class DistanceSpec:
    """Which discrepancy an MDE minimises; density-based kinds carry a KDE."""

    kind: DistanceKind
    kde: KdeModel | None = None

    def __post_init__(self):
        kind = DistanceKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind.needs_kde != (self.kde is not None):
            raise DomainError(f"{kind.value} {'requires' if kind.needs_kde else 'does not take'} a KDE")

    @classmethod
    def for_sample(cls, kind, s: Sample, kde: KdeModel | None = None) -> "DistanceSpec":
        kind = DistanceKind(kind)
        if kind.needs_kde:
            return cls(kind, kde if kde is not None else KdeModel.from_sample(s))
        return cls(kind)


def _objective_fn(kind: DistanceKind, s: Sample, kde: KdeModel | None, scale: float = 1.0):
    """Objective on raw ``(sigma, beta)``; returns ``inf`` outside the parameter space."""
    x = s.sorted
    n = s.n
    j = np.arange(1, n + 1, dtype=float)
    if kind is DistanceKind.CVM:
        pos = (2.0 * j - 1.0) / (2.0 * n)
        const = 1.0 / (12.0 * n)

        def f(sigma, beta):
            cdf = -np.expm1(-beta * np.log1p(x / sigma))
            return const + np.sum((cdf - pos) ** 2)
    elif kind is DistanceKind.SD:
        pos = j / (n + 1.0)

        def f(sigma, beta):
            cdf = -np.expm1(-beta * np.log1p(x / sigma))
            return np.sum((cdf - pos) ** 2)
    else:
        same = kde.data is s or np.array_equal(kde.data.sorted, x)
        fh = kde.at_order_statistics() if same else kde_eval(kde, x)

        def pdf(sigma, beta):
            return (beta / sigma) * np.exp(-(beta + 1.0) * np.log1p(x / sigma))

        if kind is DistanceKind.KL:
            log_fh = np.log(fh)

            def f(sigma, beta):
                return np.mean(log_fh - np.log(pdf(sigma, beta)))
        elif kind is DistanceKind.CHI2:
            def f(sigma, beta):
                g = pdf(sigma, beta)
                return np.mean((fh - g) ** 2 / (g * fh))
        else:
            def f(sigma, beta):
                return np.mean(np.abs(1.0 - pdf(sigma, beta) / fh))

    def objective(sigma, beta):
        if not (sigma > 0.0 and beta > 0.0 and math.isfinite(sigma) and math.isfinite(beta)):
            return math.inf
        with np.errstate(all="ignore"):
            v = float(f(sigma, beta))
        return scale * v if math.isfinite(v) else math.inf

    return objective


def mde_objective(s: Sample, spec: DistanceSpec, p: LomaxParams) -> float:
    """Distance between the sample and ``Lomax(p)`` under ``spec.kind``.

    ``CVM``  ``1/(12n) + sum_j (F(X_{j:n}) - (2j-1)/(2n))**2``
    ``SD``   ``sum_j (F(X_{j:n}) - j/(n+1))**2``
    ``KL``   ``mean_j log(fh(X_j) / f(X_j))``
    ``CHI2`` ``mean_j (fh - f)**2 / (f fh)`` at the data
    ``TV``   ``mean_j |1 - f / fh|`` at the data

    where ``fh`` is the kernel density estimate carried by ``spec``.
    """
    v = _objective_fn(spec.kind, s, spec.kde)(p.sigma, p.beta)
    if not math.isfinite(v):
        # locate an offending observation for the error message
        point = None
        if spec.kind.needs_kde:
            fh = kde_eval(spec.kde, s.sorted)
            bad = np.flatnonzero(~(fh > 0.0))
            point = float(s.sorted[bad[0]]) if bad.size else None
        raise ObjectiveError(f"{spec.kind.value} objective is not finite at {p}", point=point)
    return v


OPTIMIZERS = ("bfgs", "optim")


def _start_points(s: Sample):
    for est in (estimate_lme, estimate_mme):
        r = est(s)
        if r.converged:
            yield r.params.as_tuple(), r.method.value
    yield (float(np.median(s.sorted)) if np.median(s.sorted) > 0 else float(np.mean(s.sorted)), 1.5), "median"


def estimate_mde(
    s: Sample,
    kind,
    *,
    kde: KdeModel | None = None,
    optimizer: str = "bfgs",
    settings: QuasiNewtonSettings | None = None,
) -> EstimateResult:
    """Minimum-distance estimate started from the L-moment fit.

    Parameters
    ----------
    s : Sample
    kind : DistanceKind or str
        ``CVM``, ``SD``, ``KL``, ``CHI2`` or ``TV``.
    kde : KdeModel, optional
        Shared density estimate for the density-based kinds; built with the
        Silverman bandwidth when omitted.
    optimizer : {"bfgs", "optim"}
        ``"bfgs"`` minimises over ``(log sigma, log beta)`` to a gradient
        tolerance. ``"optim"`` replays R's ``optim(method = "BFGS")`` with its
        default controls on the natural parameters, including its early stop
        on small relative change; the SD distance is divided by ``n`` on that
        path. Results hitting the 100-iteration cap are kept on the ``optim``
        path, with the cap noted in ``reason``.
    settings : QuasiNewtonSettings, optional
        Override the optimizer controls.

    The start is the LME fit, falling back to MME and then ``(median, 1.5)``.
    """
    kind = DistanceKind(kind)
    method = kind.method
    _require_n(s)
    if kind.needs_kde:
        s.require_positive()
    else:
        s.require_nonnegative()
    if optimizer not in OPTIMIZERS:
        raise DomainError(f"optimizer must be one of {OPTIMIZERS}, got {optimizer!r}")
    if kind.needs_kde and kde is None:
        kde = KdeModel.from_sample(s)

    start, _ = next(iter(_start_points(s)))
    if optimizer == "bfgs":
        cfg = settings or _MDE_BFGS
        obj = _objective_fn(kind, s, kde)

        def f(u):
            if max(u[0], u[1]) > _LOG_MAX:
                return math.inf
            return obj(math.exp(u[0]), math.exp(u[1]))

        x0 = np.log(start)
        back = np.exp
        keep_capped = False
    else:
        cfg = settings or R_OPTIM_BFGS
        obj = _objective_fn(kind, s, kde, scale=1.0 / s.n if kind is DistanceKind.SD else 1.0)

        def f(p):
            return obj(p[0], p[1])

        x0 = np.array(start)
        back = np.asarray
        keep_capped = True

    try:
        res = minimize_quasi_newton(f, x0, settings=cfg)
    except OptimizerError as exc:
        return EstimateResult(method, None, False, reason=f"optimizer failure: {exc}")
    if optimizer == "bfgs" and kind is DistanceKind.TV:
        res = _polish_simplex(f, res)
    sigma, beta = (float(v) for v in back(res.argmin))
    value = res.value
    if optimizer == "optim" and kind is DistanceKind.SD:
        value = value * s.n
    if not res.converged and not keep_capped:
        return EstimateResult(method, None, False, reason=f"optimizer: {res.message}", objective_value=value,
                              iterations=res.iterations, raw=(sigma, beta))
    if optimizer == "bfgs" and beta > _BETA_RUNAWAY:
        return EstimateResult(method, None, False, reason="estimate drifting to exponential limit",
                              objective_value=value, iterations=res.iterations, raw=(sigma, beta))
    note = None if res.converged else res.message
    return _result(method, sigma, beta, "non-positive estimate", reason=note, objective_value=value,
                   iterations=res.iterations)


def _polish_simplex(f, res):
    """Nelder-Mead refinement for the non-smooth TV distance.

    Gradient steps stall on its kinks; the simplex starts from a fixed offset
    around the quasi-Newton point so the refinement is translation invariant.
    """
    x0 = np.asarray(res.argmin, dtype=float)
    simplex = np.vstack([x0, x0 + [0.02, 0.0], x0 + [0.0, 0.02]])
    with np.errstate(all="ignore"):
        nm = _opt.minimize(lambda u: f(u), x0, method="Nelder-Mead",
                           options={"initial_simplex": simplex, "xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000})
    if not (np.isfinite(nm.fun) and nm.fun <= res.value):
        return res
    return replace(res, argmin=np.asarray(nm.x), value=float(nm.fun), converged=res.converged or bool(nm.success),
                   iterations=res.iterations + int(nm.nit))


# a fixed step in log coordinates is a relative step on (sigma, beta), and
# keeps the whole search an exact translation when the data are rescaled
_MDE_BFGS = QuasiNewtonSettings(tol=1e-8, max_iter=500, grad_step=float(np.finfo(float).eps) ** (1.0 / 3.0))
_LOG_MAX = 700.0
# beyond this shape the fit is numerically an exponential distribution
_BETA_RUNAWAY = 1e6


# ------------------------------------------------------------- dispatch


def _as_method(m) -> Method:
    return m if isinstance(m, Method) else Method.parse(m)


def fit(s: Sample, method, *, kde: KdeModel | None = None, optimizer: str = "bfgs") -> EstimateResult:
    """Run one estimator by :class:`Method` (or its name)."""
    method = _as_method(method)
    if method is Method.MME:
        return estimate_mme(s)
    if method is Method.LME:
        return estimate_lme(s)
    if method is Method.PWME:
        return estimate_pwme(s)
    if method is Method.MLE:
        return estimate_mle(s)
    if method is Method.MLE_B:
        return estimate_mle_bias_corrected(s)
    kind = DistanceKind(method.value[len("MDE_"):])
    return estimate_mde(s, kind, kde=kde, optimizer=optimizer)


def fit_all(s: Sample, methods=None, *, optimizer: str = "bfgs") -> dict[Method, EstimateResult]:
    """Fit several estimators, sharing one KDE and one MLE fit between them.

    Precondition failures (for example non-positive data for the
    density-based distances) are returned as non-converged results.
    """
    methods = list(Method) if methods is None else [_as_method(m) for m in methods]
    out: dict[Method, EstimateResult] = {}
    kde = None
    mle = None
    for m in methods:
        try:
            if m in (Method.MLE, Method.MLE_B) and mle is None:
                mle = estimate_mle(s)
            if m is Method.MLE:
                out[m] = mle
            elif m is Method.MLE_B:
                out[m] = estimate_mle_bias_corrected(s, mle)
            elif m.value.startswith("MDE_"):
                kind = DistanceKind(m.value[len("MDE_"):])
                if kind.needs_kde and kde is None:
                    s.require_positive()
                    kde = KdeModel.from_sample(s)
                out[m] = estimate_mde(s, kind, kde=kde if kind.needs_kde else None, optimizer=optimizer)
            else:
                out[m] = fit(s, m)
        except LomaxError as exc:
            out[m] = EstimateResult(m, None, False, reason=str(exc))
    return out
