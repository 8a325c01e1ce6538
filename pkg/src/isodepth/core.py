"""
Datasets, 1-D samples and density metrics.

Indices exposed by the 1-D API are 1-based: ``x_1 < x_2 < ... < x_n``, and
gap ``i`` is ``x_{i+1} - x_i`` for ``i = 1, ..., n - 1``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DuplicateValue,
    EmptyInput,
    NoNumericColumns,
    NonFiniteValue,
    NotEnoughPoints,
    ParseError,
    RangeOutOfBounds,
)

log = logging.getLogger(__name__)


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SortedSample1D:
    """Strictly increasing, finite 1-D sample."""

    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values).ravel()
        if v.size == 0:
            raise EmptyInput("sample is empty")
        if not np.all(np.isfinite(v)):
            raise NonFiniteValue(f"non-finite value {v[~np.isfinite(v)][0]!r}")
        d = np.diff(v)
        if np.any(d == 0):
            raise DuplicateValue(float(v[1:][d == 0][0]))
        if np.any(d < 0):
            raise ValueError("values are not sorted; use sort_and_validate()")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_gaps(cls, gaps: Sequence[float], start: float = 0.0) -> "SortedSample1D":
        """Sample anchored at ``start`` with the given adjacent gaps."""
        g = np.asarray(gaps, dtype=np.float64)
        if np.any(g <= 0):
            raise ValueError("gaps must be positive")
        return cls(np.concatenate([[start], start + np.cumsum(g)]))

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.values)

    def __len__(self):
        return self.n

    def __getitem__(self, i):
        return self.values[i]

    def __eq__(self, other):
        if not isinstance(other, SortedSample1D):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())

    def __repr__(self):
        return f"SortedSample1D({self.values.tolist()!r})"


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ``n x d`` matrix of finite reals with column labels."""

    rows: np.ndarray
    column_names: tuple = field(default=())

    def __post_init__(self):
        r = np.array(self.rows, dtype=np.float64)
        if r.ndim == 1:
            r = r[:, None]
        if r.ndim != 2:
            raise ValueError("rows must be a 2-D matrix")
        if r.shape[0] == 0:
            raise EmptyInput("dataset has no rows")
        if r.shape[1] == 0:
            raise NoNumericColumns("dataset has no columns")
        if not np.all(np.isfinite(r)):
            raise NonFiniteValue("dataset contains non-finite entries")
        r = np.ascontiguousarray(r)
        r.setflags(write=False)
        names = tuple(self.column_names) or tuple(f"x{j + 1}" for j in range(r.shape[1]))
        if len(names) != r.shape[1]:
            raise ValueError("column_names length does not match the number of columns")
        object.__setattr__(self, "rows", r)
        object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def column(self, key) -> np.ndarray:
        if isinstance(key, str):
            try:
                key = self.column_names.index(key)
            except ValueError:
                raise KeyError(f"no column named {key!r}") from None
        return self.rows[:, key]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.column_names == other.column_names and np.array_equal(self.rows, other.rows)

    def __hash__(self):
        return hash((self.column_names, self.rows.tobytes()))


@dataclass(frozen=True)
class DensityMetrics:
    U: float
    L: float
    kappa: float
    delta: float
    gap_range: tuple

    def to_dict(self):
        return {
            "U": self.U,
            "L": self.L,
            "kappa": self.kappa,
            "delta": self.delta,
            "gap_range": list(self.gap_range),
        }


def sort_and_validate(samples: Iterable[float]) -> SortedSample1D:
    """Sort ``samples`` ascending; reject empty, non-finite or repeated input."""
    v = np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples,
                   dtype=np.float64).ravel()
    if v.size == 0:
        raise EmptyInput("no samples")
    bad = ~np.isfinite(v)
    if bad.any():
        raise NonFiniteValue(f"non-finite value {v[bad][0]!r}")
    v = np.sort(v, kind="stable")
    same = np.diff(v) == 0
    if same.any():
        raise DuplicateValue(float(v[1:][same][0]))
    return SortedSample1D(v)


def jitter(values, eps: float, seed: int) -> np.ndarray:
    """Add seeded uniform noise in ``[-eps, eps]`` to break ties."""
    v = np.asarray(values, dtype=np.float64)
    if eps <= 0:
        return v.copy()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x6A1773]))
    return v + rng.uniform(-eps, eps, size=v.shape)


def density_metrics(s: SortedSample1D, first_gap: int = 1, last_gap: int | None = None) -> DensityMetrics:
    """Max/min adjacent gap over gaps ``first_gap..last_gap`` (inclusive, 1-based).

    Marginal case studies leave out the anomaly's own gap by passing
    ``first_gap=2``.
    """
    if s.n < 2:
        raise NotEnoughPoints("density metrics need at least two points")
    if last_gap is None:
        last_gap = s.n - 1
    if not 1 <= first_gap <= last_gap <= s.n - 1:
        raise RangeOutOfBounds(f"gap range [{first_gap}, {last_gap}] outside [1, {s.n - 1}]")
    g = s.gaps[first_gap - 1:last_gap]
    return _metrics(g, (first_gap, last_gap))


def _metrics(g, gap_range) -> DensityMetrics:
    U = float(np.max(g))
    L = float(np.min(g))
    return DensityMetrics(U=U, L=L, kappa=U / L, delta=U - L, gap_range=tuple(gap_range))


def merge_metrics(s: SortedSample1D, ranges: Sequence[tuple]) -> DensityMetrics:
    """Density metrics over the union of several gap ranges."""
    if s.n < 2:
        raise NotEnoughPoints("density metrics need at least two points")
    parts = []
    for a, b in ranges:
        if not 1 <= a <= b <= s.n - 1:
            raise RangeOutOfBounds(f"gap range [{a}, {b}] outside [1, {s.n - 1}]")
        parts.append(s.gaps[a - 1:b])
    if not parts:
        raise RangeOutOfBounds("no gap ranges given")
    return _metrics(np.concatenate(parts), tuple(tuple(r) for r in ranges))


def is_kappa_dense(s: SortedSample1D, kappa: float, first_gap: int = 1, last_gap: int | None = None) -> bool:
    """Gap ratio max/min over the range is at most ``kappa``."""
    return density_metrics(s, first_gap, last_gap).kappa <= kappa


def is_delta_dense(s: SortedSample1D, delta: float, first_gap: int = 1, last_gap: int | None = None) -> bool:
    """Gap spread max-min over the range is at most ``delta``."""
    return density_metrics(s, first_gap, last_gap).delta <= delta


def _parse_float(text):
    try:
        return float(text)
    except ValueError:
        return None


def load_csv(path, columns: Sequence | None = None) -> Dataset:
    """Read a headed CSV file into a :class:`Dataset`.

    Lines starting with ``#`` are ignored. Without ``columns``, a column is
    kept when its first data cell parses as a number; others are skipped
    with a warning. Any later cell that fails to parse raises
    :class:`ParseError`.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyInput(f"{path}: no header row") from None
        body = [r for r in reader if r and any(c.strip() for c in r)]

    if not body:
        raise EmptyInput(f"{path}: no data rows")

    if columns is not None:
        idx = []
        for c in columns:
            if isinstance(c, int):
                idx.append(c)
            elif c in header:
                idx.append(header.index(c))
            else:
                raise KeyError(f"{path}: no column named {c!r}")
    else:
        idx = []
        for j, name in enumerate(header):
            first = body[0][j] if j < len(body[0]) else ""
            if _parse_float(first) is None:
                log.warning("%s: skipping non-numeric column %r", path, name)
            else:
                idx.append(j)
        if not idx:
            raise NoNumericColumns(f"{path}: no numeric columns")

    out = np.empty((len(body), len(idx)))
    for r, row in enumerate(body):
        for c, j in enumerate(idx):
            cell = row[j] if j < len(row) else ""
            val = _parse_float(cell)
            if val is None:
                raise ParseError(r + 1, header[j], cell)
            if not math.isfinite(val):
                raise NonFiniteValue(f"{path}: non-finite value at row {r + 1}, column {header[j]!r}")
            out[r, c] = val
    return Dataset(out, tuple(header[j] for j in idx))
