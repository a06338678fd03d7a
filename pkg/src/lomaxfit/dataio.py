"""Reading and writing samples, tie de-grouping, and the bundled wind data."""
from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .distribution import Sample
from .errors import DataError, DomainError
from .estimators import EstimateResult, Method, fit_all

__all__ = [
    "GroupedTies",
    "degroup",
    "group_ties",
    "degroup_values",
    "load_sample",
    "save_sample",
    "wind_rounded",
    "wind_data",
    "wind_workflow",
    "WIND_SHIFT",
]

# smallest rounded loss is 2, so nothing below 1.5 was observed
WIND_SHIFT = 1.5


@dataclass(frozen=True)
class GroupedTies:
    """Runs of tied rounded observations and the interval each came from."""

    runs: tuple[tuple[float, float, int], ...]

    def __post_init__(self):
        prev_upper = -math.inf
        for lower, upper, count in self.runs:
            if not lower < upper:
                raise DomainError(f"run interval needs lower < upper, got ({lower}, {upper})")
            if int(count) != count or count < 1:
                raise DomainError(f"run count must be a positive integer, got {count}")
            if lower < prev_upper:
                raise DomainError("runs must be sorted and non-overlapping")
            prev_upper = upper

    @property
    def n(self) -> int:
        return sum(c for _, _, c in self.runs)


def degroup(lower: float, upper: float, count: int) -> np.ndarray:
    """Spread ``count`` tied values over ``(lower, upper)``.

    Returns the expected uniform order statistics
    ``((k+1-j) * lower + j * upper) / (k+1)`` for ``j = 1..k``; their mean is
    the interval midpoint.
    """
    if not lower < upper:
        raise DomainError(f"need lower < upper, got ({lower}, {upper})")
    if int(count) != count or count < 1:
        raise DomainError(f"count must be a positive integer, got {count}")
    k = int(count)
    j = np.arange(1, k + 1, dtype=float)
    return ((k + 1 - j) / (k + 1)) * lower + (j / (k + 1)) * upper


def group_ties(values, half_width: float = 0.5) -> GroupedTies:
    """Collect rounded values into runs ``(v - half_width, v + half_width, count)``."""
    counts = Counter(float(v) for v in values)
    return GroupedTies(tuple((v - half_width, v + half_width, c) for v, c in sorted(counts.items())))


def degroup_values(values, half_width: float = 0.5, decimals: int | None = None) -> np.ndarray:
    """De-group every run of ties in ``values``; singletons map to themselves."""
    ties = group_ties(values, half_width)
    out = np.concatenate([degroup(lo, up, c) for lo, up, c in ties.runs])
    return out if decimals is None else np.round(out, decimals)


def load_sample(path, fmt: str = "plain", column: str | None = None) -> Sample:
    """Read a sample from disk.

    ``fmt="plain"`` expects one number per line; blank lines and lines
    starting with ``#`` are skipped. ``fmt="csv"`` reads the named ``column``
    (the first column when omitted) from a file with a header row.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    values = []
    if fmt == "plain":
        for lineno, line in enumerate(text.splitlines(), start=1):
            tok = line.strip()
            if not tok or tok.startswith("#"):
                continue
            values.append(_parse(tok, lineno))
    elif fmt == "csv":
        reader = csv.reader(text.splitlines())
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError("empty CSV file") from None
        if column is None:
            idx = 0
        elif column in header:
            idx = header.index(column)
        else:
            raise DataError(f"column {column!r} not in header {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or not any(cell.strip() for cell in row):
                continue
            if idx >= len(row):
                raise DataError(f"missing column {header[idx]!r}", line=lineno)
            values.append(_parse(row[idx].strip(), lineno))
    else:
        raise DomainError(f"unknown format {fmt!r}; use 'plain' or 'csv'")
    if not values:
        raise DataError(f"{path} holds no values")
    return Sample(values)


def _parse(token: str, lineno: int) -> float:
    try:
        v = float(token)
    except ValueError:
        raise DataError(f"cannot parse {token!r} as a number", line=lineno) from None
    if not math.isfinite(v):
        raise DataError(f"non-finite value {token!r}", line=lineno)
    return v


def save_sample(path, s: Sample, fmt: str = "plain", column: str = "x") -> None:
    """Write a sample so that :func:`load_sample` reads it back bit-exactly."""
    path = Path(path)
    # repr() is the shortest string that round-trips a float
    lines = [repr(float(v)) for v in s.values]
    if fmt == "plain":
        path.write_text("\n".join(lines) + "\n")
    elif fmt == "csv":
        path.write_text("\n".join([column, *lines]) + "\n")
    else:
        raise DomainError(f"unknown format {fmt!r}; use 'plain' or 'csv'")


def _bundled(name: str) -> Path:
    return Path(str(resources.files("lomaxfit") / "data" / name))


def wind_rounded() -> Sample:
    """1977 wind-catastrophe losses, rounded to the nearest million USD (n = 40)."""
    return load_sample(_bundled("wind_rounded.txt"))


def wind_data() -> Sample:
    """De-grouped wind-catastrophe losses at two decimals (n = 40)."""
    return load_sample(_bundled("wind.txt"))


def wind_workflow(shift: float = 0.0, optimizer: str = "optim", methods=None) -> dict[Method, EstimateResult]:
    """Fit every estimator to the de-grouped wind data.

    ``shift`` is subtracted from each observation first; ``WIND_SHIFT`` (1.5)
    moves the support origin down to the rounding floor. The default of 0.0
    fits the de-grouped values as they are. ``optimizer`` selects the MDE
    path (see :func:`lomaxfit.estimators.estimate_mde`).
    """
    s = wind_data()
    if shift:
        s = s.shifted(-shift)
    return fit_all(s, methods, optimizer=optimizer)
