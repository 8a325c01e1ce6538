"""
Exact expected depth of iForest on 1-D data.

For a sorted sample ``x_1 < ... < x_n`` the expected depth of ``x_i`` is

    sum_{j=2}^{i}   (x_j - x_{j-1}) / (x_i - x_{j-1})
  + sum_{j=i+1}^{n} (x_j - x_{j-1}) / (x_j - x_i)

The first sum is the expected number of splits that land left of ``x_i``,
the second those that land right of it. Off-sample points take the value of
the nearest boundary point outside ``[x_1, x_n]`` and the linear
interpolation of the two neighbouring sample values inside.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .core import SortedSample1D
from .errors import IndexOutOfBounds, NotEnoughPoints


@dataclass(frozen=True, eq=False)
class DepthProfile:
    sample: SortedSample1D
    expected_depths: np.ndarray

    def __len__(self):
        return self.expected_depths.size

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "x", "expected_depth"])
        for i, (x, h) in enumerate(zip(self.sample.values, self.expected_depths), start=1):
            w.writerow([i, repr(float(x)), repr(float(h))])
        return buf.getvalue()


def _check(s: SortedSample1D):
    if s.n < 2:
        raise NotEnoughPoints("expected depth needs at least two points")


def _terms(x: np.ndarray, g: np.ndarray, i: int) -> np.ndarray:
    # i is 0-based here
    left = g[:i] / (x[i] - x[:i])
    right = g[i:] / (x[i + 1:] - x[i])
    return np.concatenate([left, right])


def expected_depth_at_sample(s: SortedSample1D, i: int) -> float:
    """Expected depth of the ``i``-th smallest point (1-based)."""
    _check(s)
    if not 1 <= i <= s.n:
        raise IndexOutOfBounds(f"index {i} outside [1, {s.n}]")
    return math.fsum(_terms(s.values, s.gaps, i - 1))


def depth_profile(s: SortedSample1D) -> DepthProfile:
    """Expected depths of every sample point, ``O(n^2)``."""
    _check(s)
    x, g = s.values, s.gaps
    h = np.array([math.fsum(_terms(x, g, i)) for i in range(s.n)])
    h.setflags(write=False)
    return DepthProfile(s, h)


def expected_depth_any(s: SortedSample1D, x: float, profile: DepthProfile | None = None) -> float:
    """Expected depth of an arbitrary query ``x`` against the sample ``s``."""
    _check(s)
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("query must be finite")
    v = s.values
    if x < v[0]:
        return _h(s, 1, profile)
    if x >= v[-1]:
        return _h(s, s.n, profile)
    i = bisect.bisect_right(v, x)  # v[i-1] <= x < v[i], 1-based index i
    hi_ = _h(s, i, profile)
    if x == v[i - 1]:
        return hi_
    hj = _h(s, i + 1, profile)
    return hi_ + (x - v[i - 1]) / (v[i] - v[i - 1]) * (hj - hi_)


def _h(s, i, profile):
    if profile is not None:
        return float(profile.expected_depths[i - 1])
    return expected_depth_at_sample(s, i)


def expected_depth_many(s: SortedSample1D, xs, profile: DepthProfile | None = None) -> np.ndarray:
    """Vectorised :func:`expected_depth_any` over an array of queries."""
    if profile is None:
        profile = depth_profile(s)
    return np.array([expected_depth_any(s, x, profile) for x in np.ravel(xs)])


def rank_by_depth(profile: DepthProfile, m: int) -> list[int]:
    """1-based indices of the ``m`` shallowest points; ties go to the smaller index."""
    n = len(profile)
    if not 1 <= m <= n:
        raise IndexOutOfBounds(f"m={m} outside [1, {n}]")
    order = np.argsort(profile.expected_depths, kind="stable")
    return [int(k) + 1 for k in order[:m]]


def fast_profile(values) -> np.ndarray:
    """Expected depths of a sorted array without compensated summation.

    Vectorised over an ``n x (n-1)`` term matrix; used for sweeps and
    Monte Carlo targets where thousands of profiles are needed.
    """
    x = np.asarray(values, dtype=np.float64)
    n = x.size
    if n < 2:
        raise NotEnoughPoints("expected depth needs at least two points")
    g = np.diff(x)
    i = np.arange(n)[:, None]
    k = np.arange(n - 1)[None, :]
    den = np.where(k < i, x[:, None] - x[None, :-1], x[None, 1:] - x[:, None])
    return (g[None, :] / den).sum(axis=1)
