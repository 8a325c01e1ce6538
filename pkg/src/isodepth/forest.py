"""
Isolation trees and forests.

Trees are grown exactly as in the original algorithm: a node holding more
than one point picks an attribute uniformly among those with more than one
distinct value, picks a split uniformly between that attribute's min and
max, and sends ``x <= split`` left and the rest right. There is no depth
cap, and the forest score is the raw average depth (lower means more
anomalous).

Randomness for tree ``m`` of a forest with seed ``seed`` comes from a
Philox counter-based stream keyed by ``seed`` and started at a counter
offset proportional to ``m``, so each tree can be rebuilt on its own and
the forest does not depend on how trees are scheduled across threads.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import _kernels
from .core import Dataset
from .errors import DimensionMismatch, InvalidParams

FOREST_FORMAT = "isodepth.forest"
FOREST_VERSION = 1
MAX_REDRAWS = _kernels.MAX_REDRAWS
_CHUNK_DOUBLES = 1 << 22


@dataclass(frozen=True)
class Leaf:
    pass


@dataclass(frozen=True)
class Node:
    attr: int
    split: float
    left: "ITree"
    right: "ITree"


ITree = Union[Leaf, Node]


def _as_matrix(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.rows
    X = np.asarray(data, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    return X


def build_tree(data, rng: np.random.Generator) -> ITree:
    """Grow one isolation tree on all rows of ``data``.

    Pure-Python reference for the compiled grower. It consumes
    ``rng.random()`` draws in the same order, so the two agree tree for tree.
    """
    X = _as_matrix(data)
    return _build(X, np.arange(X.shape[0]), rng)


def _build(X, idx, rng):
    if idx.size <= 1:
        return Leaf()
    sub = X[idx]
    lo = sub.min(axis=0)
    hi = sub.max(axis=0)
    cand = np.flatnonzero(hi > lo)
    if cand.size == 0:
        return Leaf()
    c = min(int(rng.random() * cand.size), cand.size - 1)
    j = int(cand[c])
    a, b = lo[j], hi[j]
    for _ in range(MAX_REDRAWS + 1):
        s = a + rng.random() * (b - a)
        if s < b:
            break
    else:
        s = 0.5 * (a + b)
        if s >= b:
            s = a
    go_left = sub[:, j] <= s
    return Node(j, float(s), _build(X, idx[go_left], rng), _build(X, idx[~go_left], rng))


def depth(point, tree: ITree) -> int:
    """Number of splits from the root to the leaf reached by ``point``."""
    x = np.atleast_1d(np.asarray(point, dtype=np.float64))
    h = 0
    while isinstance(tree, Node):
        if tree.attr >= x.size:
            raise DimensionMismatch(f"point has {x.size} coordinates, tree splits on attribute {tree.attr}")
        tree = tree.left if x[tree.attr] <= tree.split else tree.right
        h += 1
    return h


def tree_budget(n: int, psi: int) -> int:
    """Uniform draws reserved per tree (a multiple of 4 for Philox blocks)."""
    m = min(psi, n)
    b = (m if psi < n else 0) + 2 * max(m - 1, 0) + MAX_REDRAWS
    return -(-b // 4) * 4


def tree_stream(seed: int, m: int, budget: int) -> np.random.Generator:
    """Random stream of tree ``m`` (0-based) for a forest seeded with ``seed``."""
    return np.random.Generator(np.random.Philox(key=_check_seed(seed), counter=m * (budget // 4)))


def _check_seed(seed):
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise InvalidParams(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


@dataclass(frozen=True, eq=False)
class Forest:
    """Packed ensemble of ``M`` trees.

    Node arrays have shape ``(M, 2 * psi - 1)`` in preorder; ``subsamples``
    holds the training-row indices each tree was grown on.
    """

    attr: np.ndarray
    split: np.ndarray
    left: np.ndarray
    right: np.ndarray
    subsamples: np.ndarray
    subsample_size: int
    base_seed: int
    n_train: int
    d: int

    @property
    def n_trees(self) -> int:
        return self.attr.shape[0]

    def __len__(self):
        return self.n_trees

    def tree(self, m: int) -> ITree:
        a, s, lf, rt = self.attr[m], self.split[m], self.left[m], self.right[m]

        def rec(k):
            if a[k] < 0:
                return Leaf()
            return Node(int(a[k]), float(s[k]), rec(lf[k]), rec(rt[k]))

        return rec(0)

    @property
    def trees(self) -> list:
        return [self.tree(m) for m in range(self.n_trees)]

    def __eq__(self, other):
        if not isinstance(other, Forest):
            return NotImplemented
        same_meta = (self.subsample_size, self.base_seed, self.n_train, self.d) == (
            other.subsample_size, other.base_seed, other.n_train, other.d)
        return same_meta and all(
            np.array_equal(getattr(self, f), getattr(other, f), equal_nan=(f == "split"))
            for f in ("attr", "split", "left", "right", "subsamples"))

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": FOREST_FORMAT,
            "version": FOREST_VERSION,
            "n_train": self.n_train,
            "d": self.d,
            "subsample_size": self.subsample_size,
            "base_seed": self.base_seed,
            "n_trees": self.n_trees,
            "subsamples": self.subsamples.tolist(),
            "trees": [_tree_to_dict(t) for t in self.trees],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, doc: dict) -> "Forest":
        if doc.get("format") != FOREST_FORMAT:
            raise InvalidParams(f"not a forest document (format={doc.get('format')!r})")
        if doc.get("version") != FOREST_VERSION:
            raise InvalidParams(f"unsupported forest version {doc.get('version')!r}")
        M = int(doc["n_trees"])
        trees = doc["trees"]
        if len(trees) != M:
            raise InvalidParams("n_trees does not match the number of trees")
        psi_eff = min(int(doc["subsample_size"]), int(doc["n_train"]))
        K = max(2 * psi_eff - 1, 1)
        attr = np.full((M, K), -1, np.int32)
        split = np.full((M, K), np.nan)
        left = np.full((M, K), -1, np.int32)
        right = np.full((M, K), -1, np.int32)
        for m, t in enumerate(trees):
            _fill_arrays(t, attr[m], split[m], left[m], right[m])
        subs = np.asarray(doc["subsamples"], dtype=np.int64).reshape(M, psi_eff)
        return cls(attr, split, left, right, subs, int(doc["subsample_size"]),
                   int(doc["base_seed"]), int(doc["n_train"]), int(doc["d"]))

    @classmethod
    def from_json(cls, text: str) -> "Forest":
        return cls.from_dict(json.loads(text))


def _tree_to_dict(t: ITree) -> dict:
    if isinstance(t, Leaf):
        return {"leaf": True}
    return {"attr": t.attr, "split": t.split, "left": _tree_to_dict(t.left), "right": _tree_to_dict(t.right)}


def _fill_arrays(doc, attr, split, left, right):
    # preorder numbering, left subtree first, as produced by the grower
    stack = [(doc, -1, 0)]
    nn = 0
    while stack:
        node, parent, side = stack.pop()
        k = nn
        nn += 1
        if k >= attr.size:
            raise InvalidParams("tree has more nodes than the subsample allows")
        if parent >= 0:
            (left if side == 0 else right)[parent] = k
        if node.get("leaf"):
            continue
        attr[k] = int(node["attr"])
        split[k] = float(node["split"])
        stack.append((node["right"], k, 1))
        stack.append((node["left"], k, 0))


def _grow_range(X, psi, seed, m0, m1, budget, attr, split, left, right, subs):
    gen = tree_stream(seed, m0, budget)
    U = gen.random((m1 - m0, budget))
    _kernels.grow_chunk(X, psi, U, attr[m0:m1], split[m0:m1], left[m0:m1], right[m0:m1], subs[m0:m1])


def _chunks(M, budget):
    step = max(1, _CHUNK_DOUBLES // budget)
    return [(m0, min(M, m0 + step)) for m0 in range(0, M, step)]


def fit_forest(data, M: int, psi: int, seed: int, n_jobs: int = 1) -> Forest:
    """Grow ``M`` trees, each on ``min(psi, n)`` rows drawn without replacement.

    The result depends only on ``(data, M, psi, seed)``; ``n_jobs`` only
    changes how chunks of trees are spread over threads.
    """
    X = np.ascontiguousarray(_as_matrix(data), dtype=np.float64)
    n, d = X.shape
    if M < 1 or psi < 1:
        raise InvalidParams("M and psi must be at least 1")
    if n < 1:
        raise InvalidParams("data has no rows")
    seed = _check_seed(seed)
    psi_eff = min(psi, n)
    K = max(2 * psi_eff - 1, 1)
    budget = tree_budget(n, psi)
    attr = np.full((M, K), -1, np.int32)
    split = np.full((M, K), np.nan)
    left = np.full((M, K), -1, np.int32)
    right = np.full((M, K), -1, np.int32)
    subs = np.empty((M, psi_eff), np.int64)

    jobs = _chunks(M, budget)
    run = lambda c: _grow_range(X, psi, seed, c[0], c[1], budget, attr, split, left, right, subs)  # noqa: E731
    if n_jobs > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            list(pool.map(run, jobs))
    else:
        for c in jobs:
            run(c)
    return Forest(attr, split, left, right, subs, int(psi), seed, n, d)


def _points(forest_d, points) -> np.ndarray:
    Q = np.asarray(points, dtype=np.float64)
    if Q.ndim == 0:
        Q = Q.reshape(1, 1)
    elif Q.ndim == 1:
        Q = Q.reshape(1, -1) if forest_d > 1 or Q.size == 1 else Q.reshape(-1, 1)
    if Q.shape[1] != forest_d:
        raise DimensionMismatch(f"points have {Q.shape[1]} coordinates, forest expects {forest_d}")
    return np.ascontiguousarray(Q)


def depth_matrix(forest: Forest, points) -> np.ndarray:
    """``(M, q)`` matrix of per-tree depths for ``q`` query points."""
    Q = _points(forest.d, points)
    out = np.empty((forest.n_trees, Q.shape[0]), np.int32)
    _kernels.depths(Q, forest.attr, forest.split, forest.left, forest.right, out)
    return out


def score(forest: Forest, point) -> float:
    """Average depth of a single point over all trees."""
    x = np.atleast_1d(np.asarray(point, dtype=np.float64))
    if x.size != forest.d:
        raise DimensionMismatch(f"point has {x.size} coordinates, forest expects {forest.d}")
    return float(score_many(forest, x.reshape(1, -1))[0])


def score_many(forest: Forest, points) -> np.ndarray:
    """Average depths of several points (rows of ``points``)."""
    D = depth_matrix(forest, points)
    return D.sum(axis=0, dtype=np.int64) / forest.n_trees


def forest_depths(data, points, M: int, psi: int, seed: int, n_jobs: int = 1,
                  return_subsamples: bool = False):
    """Per-tree depths of ``points`` without keeping the trees around.

    Identical to ``depth_matrix(fit_forest(data, M, psi, seed), points)`` but
    memory stays bounded by one chunk of trees.
    """
    X = np.ascontiguousarray(_as_matrix(data), dtype=np.float64)
    n, d = X.shape
    if M < 1 or psi < 1:
        raise InvalidParams("M and psi must be at least 1")
    seed = _check_seed(seed)
    Q = _points(d, points)
    psi_eff = min(psi, n)
    K = max(2 * psi_eff - 1, 1)
    budget = tree_budget(n, psi)
    out = np.empty((M, Q.shape[0]), np.int32)
    subs_all = np.empty((M, psi_eff), np.int64) if return_subsamples else None

    def run(c):
        m0, m1 = c
        T = m1 - m0
        attr = np.full((T, K), -1, np.int32)
        split = np.full((T, K), np.nan)
        left = np.full((T, K), -1, np.int32)
        right = np.full((T, K), -1, np.int32)
        subs = np.empty((T, psi_eff), np.int64)
        U = tree_stream(seed, m0, budget).random((T, budget))
        _kernels.grow_chunk(X, psi, U, attr, split, left, right, subs)
        _kernels.depths(Q, attr, split, left, right, out[m0:m1])
        if subs_all is not None:
            subs_all[m0:m1] = subs

    jobs = _chunks(M, budget)
    if n_jobs > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            list(pool.map(run, jobs))
    else:
        for c in jobs:
            run(c)
    return (out, subs_all) if return_subsamples else out
