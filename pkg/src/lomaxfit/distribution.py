"""The Lomax (Pareto type II, zero location) distribution.

A random variable X is Lomax(sigma, beta) when

    F(x) = 1 - (1 + x / sigma) ** (-beta),    x >= 0,

with scale ``sigma > 0`` and shape ``beta > 0``. Moments of order ``r >= beta``
are infinite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DataError, DomainError, MomentError

__all__ = [
    "LomaxParams",
    "Sample",
    "lomax_pdf",
    "lomax_cdf",
    "lomax_quantile",
    "lomax_sample",
    "lomax_raw_moment",
    "fisher_information_inverse",
    "as_generator",
]


def _positive_finite(value, name):
    try:
        value = float(value)
    except (TypeError, ValueError) as exc:
        raise DomainError(f"{name} must be a real number, got {value!r}") from exc
    if not math.isfinite(value) or value <= 0.0:
        raise DomainError(f"{name} must be finite and > 0, got {value!r}")
    return value


@dataclass(frozen=True)
class LomaxParams:
    """Scale ``sigma`` and shape ``beta`` of a Lomax distribution."""

    sigma: float
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "sigma", _positive_finite(self.sigma, "sigma"))
        object.__setattr__(self, "beta", _positive_finite(self.beta, "beta"))

    def as_tuple(self):
        return (self.sigma, self.beta)


class Sample:
    """An immutable batch of observations with cached order statistics.

    Parameters
    ----------
    values : array-like
        At least one finite real number.
    """

    __slots__ = ("_values", "_sorted")

    def __init__(self, values):
        arr = np.array(values, dtype=float).ravel()
        if arr.size == 0:
            raise DataError("sample is empty")
        if not np.all(np.isfinite(arr)):
            raise DataError("sample contains non-finite values")
        arr.flags.writeable = False
        srt = np.sort(arr, kind="stable")
        srt.flags.writeable = False
        self._values = arr
        self._sorted = srt

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def sorted(self) -> np.ndarray:
        """Order statistics ``X_{1:n} <= ... <= X_{n:n}``."""
        return self._sorted

    @property
    def n(self) -> int:
        return self._values.size

    def __len__(self):
        return self._values.size

    def __iter__(self):
        return iter(self._values.tolist())

    def __repr__(self):
        return f"Sample(n={self.n}, min={self._sorted[0]:g}, max={self._sorted[-1]:g})"

    def __eq__(self, other):
        if not isinstance(other, Sample):
            return NotImplemented
        return np.array_equal(self._values, other._values)

    __hash__ = None

    def scaled(self, c: float) -> "Sample":
        return Sample(self._values * float(c))

    def shifted(self, c: float) -> "Sample":
        return Sample(self._values + float(c))

    def require_nonnegative(self):
        if self._sorted[0] < 0.0:
            raise DataError(f"Lomax fitting needs observations >= 0, found {self._sorted[0]:g}")

    def require_positive(self):
        if self._sorted[0] <= 0.0:
            raise DataError(f"this estimator needs observations > 0, found {self._sorted[0]:g}")


def _check_x(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("x must be finite")
    if np.any(arr < 0.0):
        raise DomainError("x must be >= 0")
    return arr


def _scalar_or_array(template, out):
    if np.ndim(template) == 0:
        return float(out)
    return out


def lomax_pdf(p: LomaxParams, x):
    """Density ``(beta/sigma) * (1 + x/sigma) ** -(beta + 1)``."""
    arr = _check_x(x)
    out = (p.beta / p.sigma) * np.exp(-(p.beta + 1.0) * np.log1p(arr / p.sigma))
    return _scalar_or_array(x, out)


def lomax_cdf(p: LomaxParams, x):
    arr = _check_x(x)
    # expm1/log1p keep full relative precision for x << sigma
    out = -np.expm1(-p.beta * np.log1p(arr / p.sigma))
    return _scalar_or_array(x, out)


def lomax_quantile(p: LomaxParams, u):
    """Inverse CDF on ``[0, 1)``."""
    arr = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr >= 1.0):
        raise DomainError("u must lie in [0, 1)")
    out = p.sigma * np.expm1(-np.log1p(-arr) / p.beta)
    return _scalar_or_array(u, out)


def as_generator(seed) -> np.random.Generator:
    """Coerce an int, ``SeedSequence`` or ``Generator`` into a ``Generator``."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def lomax_sample(p: LomaxParams, n: int, seed) -> Sample:
    """Draw ``n`` i.i.d. variates by inversion of uniform(0, 1) draws."""
    n = int(n)
    if n < 1:
        raise DomainError("n must be >= 1")
    u = as_generator(seed).random(n)
    return Sample(lomax_quantile(p, u))


def lomax_raw_moment(p: LomaxParams, r: int) -> float:
    """``E[X**r] = sigma**r * Gamma(beta - r) * Gamma(1 + r) / Gamma(beta)``."""
    if int(r) != r or r < 1:
        raise DomainError("r must be a positive integer")
    if r >= p.beta:
        raise MomentError(f"moment of order {r} does not exist for beta={p.beta}")
    log_ratio = gammaln(p.beta - r) + gammaln(1.0 + r) - gammaln(p.beta)
    return float(p.sigma**r * np.exp(log_ratio))


def fisher_information_inverse(p: LomaxParams, n: int) -> np.ndarray:
    """Inverse expected information for ``(sigma, beta)`` from ``n`` observations."""
    if int(n) != n or n < 1:
        raise DomainError("n must be a positive integer")
    s, b = p.sigma, p.beta
    off = s * b * (b + 1.0) * (b + 2.0)
    # per-observation matrix divided once, so the 1/n scaling is exact
    per_obs = np.array(
        [
            [s * s * (b + 2.0) * (b + 1.0) ** 2 / b, off],
            [off, b * b * (b + 1.0) ** 2],
        ]
    )
    return per_obs / n
