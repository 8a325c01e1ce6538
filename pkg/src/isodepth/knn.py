"""k-NN anomaly scores: mean L1 distance to the k nearest neighbours."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset
from .errors import DimensionMismatch, IndexOutOfBounds, InvalidParams, KTooLarge


@dataclass(frozen=True)
class KnnConfig:
    k: int = 1
    exclude_self: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise InvalidParams("k must be at least 1")


def _matrix(data):
    if isinstance(data, Dataset):
        return data.rows
    X = np.asarray(data, dtype=np.float64)
    return X[:, None] if X.ndim == 1 else X


def knn_score(data, point, cfg: KnnConfig) -> float:
    """Score one query. Higher means more anomalous.

    With ``exclude_self`` and a query equal to a training row, one copy of
    that row is dropped from the candidates.
    """
    X = _matrix(data)
    x = np.atleast_1d(np.asarray(point, dtype=np.float64))
    if x.size != X.shape[1]:
        raise DimensionMismatch(f"point has {x.size} coordinates, data has {X.shape[1]}")
    dist = np.abs(X - x).sum(axis=1)
    if cfg.exclude_self:
        hit = np.flatnonzero(np.all(X == x, axis=1))
        if hit.size:
            dist = np.delete(dist, hit[0])
    if cfg.k > dist.size:
        raise KTooLarge(f"k={cfg.k} but only {dist.size} candidates")
    return float(np.mean(np.sort(dist, kind="stable")[: cfg.k]))


def knn_scores(data, cfg: KnnConfig) -> np.ndarray:
    """Scores of every training row; with ``exclude_self`` row ``i`` skips itself."""
    X = _matrix(data)
    n = X.shape[0]
    avail = n - 1 if cfg.exclude_self else n
    if cfg.k > avail:
        raise KTooLarge(f"k={cfg.k} but only {avail} candidates")
    out = np.empty(n)
    step = max(1, 4_000_000 // max(n * X.shape[1], 1))
    for a in range(0, n, step):
        b = min(n, a + step)
        D = np.abs(X[a:b, None, :] - X[None, :, :]).sum(axis=2)
        if cfg.exclude_self:
            D[np.arange(b - a), np.arange(a, b)] = np.inf
        D.partition(cfg.k - 1, axis=1)
        out[a:b] = np.sort(D[:, : cfg.k], axis=1).mean(axis=1)
    return out


def rank_by_knn(data, cfg: KnnConfig, m: int) -> list[int]:
    """1-based indices of the ``m`` highest scores, descending; ties to the smaller index."""
    s = knn_scores(data, cfg)
    if not 1 <= m <= s.size:
        raise IndexOutOfBounds(f"m={m} outside [1, {s.size}]")
    order = np.lexsort((np.arange(s.size), -s))
    return [int(k) + 1 for k in order[:m]]
