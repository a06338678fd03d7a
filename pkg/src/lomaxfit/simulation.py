"""Monte Carlo comparison of the estimators.

Replication ``r`` of a cell draws its sample from the substream
``SeedSequence(seed, spawn_key=(r,))``, so results do not depend on how
replications are split across worker processes.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .distribution import LomaxParams, lomax_sample
from .errors import DomainError
from .estimators import OPTIMIZERS, Method, fit_all

__all__ = [
    "MCConfig",
    "MetricBlock",
    "MethodSummary",
    "MCReport",
    "compute_metrics",
    "replication_stream",
    "run_monte_carlo",
    "run_grid",
    "load_grid",
    "CSV_COLUMNS",
    "AGGREGATIONS",
    "reports_to_csv",
    "reports_to_json",
]

AGGREGATIONS = ("per-method", "common")
"""``per-method`` summarises each estimator over its own converged
replications. ``common`` keeps only replications on which every requested
estimator converged, so all estimators share one denominator."""

CSV_COLUMNS = (
    "n", "sigma", "beta", "method", "mean_beta", "mean_sigma", "var_beta", "var_sigma",
    "rb_beta_pct", "rb_sigma_pct", "mse_beta", "mse_sigma", "tmse", "n_converged", "n_failed",
)


@dataclass(frozen=True)
class MCConfig:
    true_params: LomaxParams
    n: int
    replications: int = 10_000
    seed: int = 0
    estimators: tuple[Method, ...] = tuple(Method)
    trim_percent: float = 1.0
    optimizer: str = "optim"
    aggregation: str = "per-method"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"sample size must be an integer >= 2, got {self.n}")
        if int(self.replications) != self.replications or self.replications < 1:
            raise DomainError(f"replications must be a positive integer, got {self.replications}")
        if not 0.0 <= self.trim_percent < 100.0:
            raise DomainError(f"trim_percent must lie in [0, 100), got {self.trim_percent}")
        if self.optimizer not in OPTIMIZERS:
            raise DomainError(f"optimizer must be one of {OPTIMIZERS}")
        if self.aggregation not in AGGREGATIONS:
            raise DomainError(f"aggregation must be one of {AGGREGATIONS}")
        ests = tuple(m if isinstance(m, Method) else Method.parse(m) for m in self.estimators)
        if not ests:
            raise DomainError("at least one estimator is required")
        object.__setattr__(self, "estimators", ests)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "replications", int(self.replications))


@dataclass(frozen=True)
class MetricBlock:
    """Accuracy summaries of one estimator over the usable replications."""

    count: int
    mean_beta: float
    mean_sigma: float
    var_beta: float
    var_sigma: float
    rb_beta_pct: float
    rb_sigma_pct: float
    mse_beta: float
    mse_sigma: float
    tmse: float
    trimmed_var_beta: float
    trimmed_var_sigma: float


def _trimmed_var(v: np.ndarray, trim_percent: float) -> float:
    """Variance of the smallest ``(100 - trim)%`` of the values."""
    keep = int(math.floor(v.size * (100.0 - trim_percent) / 100.0 + 1e-9))
    keep = max(keep, min(v.size, 2))
    kept = np.sort(v)[:keep]
    return float(np.var(kept, ddof=1)) if kept.size > 1 else math.nan


def compute_metrics(estimates, truth: LomaxParams, trim_percent: float = 0.0) -> MetricBlock:
    """Mean, variance, relative bias, MSE and total MSE of ``(beta, sigma)`` pairs.

    Variances use the ``m - 1`` denominator (NaN for a single estimate);
    relative bias is in percent of the true value.
    """
    est = np.asarray(estimates, dtype=float).reshape(-1, 2)
    if est.shape[0] == 0:
        raise DomainError("no estimates to summarise")
    if not 0.0 <= trim_percent < 100.0:
        raise DomainError(f"trim_percent must lie in [0, 100), got {trim_percent}")
    b, s = est[:, 0], est[:, 1]
    m = est.shape[0]
    err_b = b - truth.beta
    err_s = s - truth.sigma
    mean_b, mean_s = float(np.mean(b)), float(np.mean(s))
    var_b = float(np.var(b, ddof=1)) if m > 1 else math.nan
    var_s = float(np.var(s, ddof=1)) if m > 1 else math.nan
    return MetricBlock(
        count=m,
        mean_beta=mean_b,
        mean_sigma=mean_s,
        var_beta=var_b,
        var_sigma=var_s,
        rb_beta_pct=100.0 * (mean_b - truth.beta) / truth.beta,
        rb_sigma_pct=100.0 * (mean_s - truth.sigma) / truth.sigma,
        mse_beta=float(np.mean(err_b**2)),
        mse_sigma=float(np.mean(err_s**2)),
        tmse=float(np.mean(err_b**2 + err_s**2)),
        trimmed_var_beta=_trimmed_var(b, trim_percent) if trim_percent else var_b,
        trimmed_var_sigma=_trimmed_var(s, trim_percent) if trim_percent else var_s,
    )


@dataclass(frozen=True)
class MethodSummary:
    method: Method
    metrics: MetricBlock | None
    n_converged: int
    n_failed: int
    failure_reasons: dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class MCReport:
    """Per-estimator summaries for one ``(n, sigma, beta)`` cell.

    ``estimates`` maps each method to an ``(replications, 2)`` array of
    ``(beta, sigma)`` with NaN rows for failed fits.
    """

    config: MCConfig
    summaries: dict[Method, MethodSummary]
    estimates: dict[Method, np.ndarray] = field(repr=False, compare=False)

    def __getitem__(self, method) -> MethodSummary:
        return self.summaries[method if isinstance(method, Method) else Method.parse(method)]

    def rows(self) -> list[dict]:
        cfg = self.config
        out = []
        for m, summ in self.summaries.items():
            mb = summ.metrics
            row = {"n": cfg.n, "sigma": cfg.true_params.sigma, "beta": cfg.true_params.beta, "method": m.label}
            for col in CSV_COLUMNS[4:13]:
                row[col] = getattr(mb, col) if mb is not None else math.nan
            row["n_converged"] = summ.n_converged
            row["n_failed"] = summ.n_failed
            out.append(row)
        return out

    def to_dict(self) -> dict:
        cfg = self.config
        return {
            "n": cfg.n,
            "sigma": cfg.true_params.sigma,
            "beta": cfg.true_params.beta,
            "replications": cfg.replications,
            "seed": cfg.seed,
            "trim_percent": cfg.trim_percent,
            "optimizer": cfg.optimizer,
            "aggregation": cfg.aggregation,
            "methods": {
                m.label: {
                    "n_converged": s.n_converged,
                    "n_failed": s.n_failed,
                    "failure_reasons": s.failure_reasons,
                    "metrics": None if s.metrics is None else {
                        k: _json_float(v) for k, v in s.metrics.__dict__.items()
                    },
                }
                for m, s in self.summaries.items()
            },
        }


def _json_float(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def replication_stream(seed: int, r: int) -> np.random.Generator:
    """Independent generator for replication ``r`` of a run seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(r),)))


def _run_block(cfg: MCConfig, start: int, stop: int):
    k = len(cfg.estimators)
    est = np.full((stop - start, k, 2), np.nan)
    reasons: list[list[str | None]] = []
    for i, r in enumerate(range(start, stop)):
        sample = lomax_sample(cfg.true_params, cfg.n, replication_stream(cfg.seed, r))
        fits = fit_all(sample, cfg.estimators, optimizer=cfg.optimizer)
        row = []
        for jm, m in enumerate(cfg.estimators):
            res = fits[m]
            if res.converged:
                est[i, jm] = (res.beta, res.sigma)
                row.append(None)
            else:
                row.append(res.reason or "unknown")
        reasons.append(row)
    return est, reasons


def _resolve_workers(workers: int | None) -> int:
    if workers is None or workers == 1:
        return 1
    if workers <= 0:
        return os.cpu_count() or 1
    return int(workers)


def run_monte_carlo(cfg: MCConfig, workers: int | None = 1, chunk_size: int | None = None) -> MCReport:
    """Simulate ``cfg.replications`` samples and summarise every estimator.

    ``workers`` > 1 spreads replications over processes (0 = one per CPU);
    the report is bit-identical for any worker count.
    """
    nw = _resolve_workers(workers)
    reps = cfg.replications
    if nw == 1:
        blocks = [_run_block(cfg, 0, reps)]
    else:
        size = chunk_size or max(1, math.ceil(reps / (4 * nw)))
        bounds = [(a, min(a + size, reps)) for a in range(0, reps, size)]
        with ProcessPoolExecutor(max_workers=nw) as pool:
            futures = [pool.submit(_run_block, cfg, a, b) for a, b in bounds]
            blocks = [f.result() for f in futures]
    est = np.concatenate([b[0] for b in blocks], axis=0)
    reasons = [row for b in blocks for row in b[1]]
    return _summarise(cfg, est, reasons)


def _summarise(cfg: MCConfig, est: np.ndarray, reasons) -> MCReport:
    summaries = {}
    per_method = {}
    all_ok = ~np.isnan(est[:, :, 0]).any(axis=1)
    for jm, m in enumerate(cfg.estimators):
        arr = est[:, jm, :]
        own_ok = ~np.isnan(arr[:, 0])
        fails = Counter(row[jm] for row in reasons if row[jm] is not None)
        if cfg.aggregation == "common":
            ok = all_ok
            excluded = int((own_ok & ~all_ok).sum())
            if excluded:
                fails["excluded: another estimator failed"] += excluded
        else:
            ok = own_ok
        metrics = compute_metrics(arr[ok], cfg.true_params, cfg.trim_percent) if ok.any() else None
        summaries[m] = MethodSummary(m, metrics, int(ok.sum()), int((~ok).sum()), dict(sorted(fails.items())))
        per_method[m] = arr
    return MCReport(cfg, summaries, per_method)


def run_grid(grid, workers: int | None = 1):
    """Run each cell in turn, yielding its :class:`MCReport` as soon as it is done."""
    grid = list(grid)
    if not grid:
        raise DomainError("grid is empty")
    for cfg in grid:
        yield run_monte_carlo(cfg, workers=workers)


def load_grid(path_or_obj) -> list[MCConfig]:
    """Parse a grid description (JSON file path, JSON text, or decoded object).

    Accepted forms are a list of cells, or an object
    ``{"defaults": {...}, "cells": [...]}``. Each cell needs ``n``, ``sigma``
    and ``beta`` and may set ``reps``, ``seed``, ``methods``,
    ``trim_percent``, ``optimizer`` and ``aggregation``; missing keys come from ``defaults``.
    """
    obj = path_or_obj
    if isinstance(obj, (str, os.PathLike)):
        text = str(obj)
        if os.path.exists(text):
            with open(text) as fh:
                obj = json.load(fh)
        else:
            obj = json.loads(text)
    defaults = {}
    if isinstance(obj, dict):
        defaults = dict(obj.get("defaults", {}))
        cells = obj.get("cells")
        if cells is None:
            raise DomainError("grid object needs a 'cells' list")
    else:
        cells = obj
    out = []
    for i, cell in enumerate(cells):
        merged = {**defaults, **cell}
        try:
            out.append(
                MCConfig(
                    true_params=LomaxParams(merged["sigma"], merged["beta"]),
                    n=merged["n"],
                    replications=merged.get("reps", merged.get("replications", 10_000)),
                    seed=merged.get("seed", 0),
                    estimators=tuple(merged.get("methods", [m.value for m in Method])),
                    trim_percent=merged.get("trim_percent", 1.0),
                    optimizer=merged.get("optimizer", "optim"),
                    aggregation=merged.get("aggregation", "per-method"),
                )
            )
        except KeyError as exc:
            raise DomainError(f"grid cell {i} is missing {exc.args[0]!r}") from None
    if not out:
        raise DomainError("grid is empty")
    return out


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rep in reports:
        for row in rep.rows():
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def reports_to_json(reports) -> str:
    return json.dumps([rep.to_dict() for rep in reports], indent=2)
