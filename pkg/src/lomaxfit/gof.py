"""Kolmogorov-Smirnov goodness of fit with a parametric-bootstrap p-value."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .distribution import LomaxParams, Sample, lomax_cdf, lomax_sample
from .errors import BootstrapError, DomainError, LomaxError
from .estimators import Method, fit

__all__ = ["GofResult", "ks_statistic", "ks_bootstrap_test", "bootstrap_stream"]


@dataclass(frozen=True)
class GofResult:
    statistic: float
    p_value: float
    bootstrap_reps: int
    refits_failed: int
    params: LomaxParams | None = None

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise DomainError(f"p-value must lie in [0, 1], got {self.p_value}")
        if self.bootstrap_reps < 1:
            raise DomainError("bootstrap_reps must be at least 1")


def ks_statistic(s: Sample, p: LomaxParams) -> float:
    """Sup-distance between the EDF of ``s`` and the Lomax CDF."""
    x = s.sorted
    n = x.size
    if n < 1:
        raise DomainError("KS statistic needs at least one observation")
    f = np.asarray(lomax_cdf(p, np.maximum(x, 0.0)), dtype=float)
    j = np.arange(1, n + 1)
    return float(max(np.max(j / n - f), np.max(f - (j - 1) / n), 0.0))


def bootstrap_stream(seed: int, b: int) -> np.random.Generator:
    """Generator for bootstrap replicate ``b``; independent of scheduling."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(b),)))


def _refit_block(params: LomaxParams, n: int, method: Method, optimizer: str, seed: int, start: int, stop: int):
    out = np.full(stop - start, np.nan)
    for i, b in enumerate(range(start, stop)):
        boot = lomax_sample(params, n, bootstrap_stream(seed, b))
        try:
            res = fit(boot, method, optimizer=optimizer)
        except LomaxError:
            continue
        if res.converged:
            out[i] = ks_statistic(boot, res.params)
    return out


def ks_bootstrap_test(
    s: Sample,
    estimator,
    reps: int = 1000,
    seed: int = 0,
    *,
    optimizer: str = "bfgs",
    workers: int | None = 1,
) -> GofResult:
    """Parametric-bootstrap KS test of the Lomax model fitted by ``estimator``.

    Each replicate draws ``n`` points from the fitted model, refits with the
    same estimator and records the KS distance to its own refit. Replicates
    whose refit fails are dropped; the p-value is
    ``(1 + #{D_b >= D_obs}) / (successful + 1)``.

    Raises :class:`BootstrapError` when the estimator fails on ``s`` or when
    more than half of the refits fail.
    """
    method = estimator if isinstance(estimator, Method) else Method.parse(estimator)
    if int(reps) != reps or reps < 1:
        raise DomainError(f"reps must be a positive integer, got {reps}")
    reps = int(reps)
    base = fit(s, method, optimizer=optimizer)
    if not base.converged:
        raise BootstrapError(f"{method.label} did not converge on the data: {base.reason}")
    d_obs = ks_statistic(s, base.params)

    if workers is not None and workers <= 0:
        nw = os.cpu_count() or 1
    else:
        nw = max(1, workers or 1)
    if nw == 1:
        d = _refit_block(base.params, s.n, method, optimizer, seed, 0, reps)
    else:
        size = max(1, math.ceil(reps / (4 * nw)))
        bounds = [(a, min(a + size, reps)) for a in range(0, reps, size)]
        with ProcessPoolExecutor(max_workers=nw) as pool:
            futs = [pool.submit(_refit_block, base.params, s.n, method, optimizer, seed, a, b) for a, b in bounds]
            d = np.concatenate([f.result() for f in futs])

    ok = ~np.isnan(d)
    failed = int((~ok).sum())
    if failed * 2 > reps:
        raise BootstrapError(f"bootstrap unstable: {failed} of {reps} refits failed")
    good = int(ok.sum())
    p = (1 + int(np.sum(d[ok] >= d_obs))) / (good + 1)
    return GofResult(d_obs, p, good, failed, base.params)
