"""
Random-walk model of isolation-tree growth around one target point.

The state ``(l, r)`` records the smallest and largest sample points still
sharing a node with the target ``x_i``. A split uniform on ``[x_l, x_r]``
either moves ``l`` rightward to some ``l' <= i`` (probability
``(x_{l'} - x_{l'-1}) / (x_r - x_l)``) or moves ``r`` down to some
``r' >= i`` (probability ``(x_{r'+1} - x_{r'}) / (x_r - x_l)``). The walk is
absorbed at ``(i, i)``, and the number of steps taken is the target's depth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import SortedSample1D
from .errors import IndexOutOfBounds, NotEnoughPoints


@dataclass(frozen=True, eq=False)
class WalkChain:
    sample: SortedSample1D
    target: int
    states: tuple
    P: np.ndarray
    initial: int
    absorbing: int

    def index(self, l: int, r: int) -> int:
        return self._lookup[(l, r)]

    @property
    def _lookup(self):
        return {s: k for k, s in enumerate(self.states)}

    def prob(self, src: tuple, dst: tuple) -> float:
        lk = self._lookup
        return float(self.P[lk[src], lk[dst]])

    def to_dict(self) -> dict:
        return {
            "format": "isodepth.walk",
            "version": 1,
            "values": self.sample.values.tolist(),
            "target": self.target,
            "states": [list(s) for s in self.states],
            "initial": self.initial,
            "absorbing": self.absorbing,
            "matrix": self.P.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _check(s, i):
    if s.n < 2:
        raise NotEnoughPoints("the walk needs at least two points")
    if not 1 <= i <= s.n:
        raise IndexOutOfBounds(f"target {i} outside [1, {s.n}]")


def build_chain(s: SortedSample1D, i: int) -> WalkChain:
    """Transition matrix over states ``(l, r)`` with ``l <= i <= r`` (1-based).

    States are ordered lexicographically; the matrix is dense.
    """
    _check(s, i)
    n = s.n
    x = s.values
    states = tuple((l, r) for l in range(1, i + 1) for r in range(i, n + 1))
    idx = {st: k for k, st in enumerate(states)}
    P = np.zeros((len(states), len(states)))
    for (l, r), k in idx.items():
        if l == r:
            P[k, k] = 1.0
            continue
        width = x[r - 1] - x[l - 1]
        for lp in range(l + 1, i + 1):
            P[k, idx[(lp, r)]] = (x[lp - 1] - x[lp - 2]) / width
        for rp in range(i, r):
            P[k, idx[(l, rp)]] = (x[rp] - x[rp - 1]) / width
    P.setflags(write=False)
    return WalkChain(s, i, states, P, idx[(1, n)], idx[(i, i)])


def _distribution(chain: WalkChain, steps: int):
    v = np.zeros(len(chain.states))
    v[chain.initial] = 1.0
    yield v
    for _ in range(steps):
        v = v @ chain.P
        yield v


def absorption_cdf(chain: WalkChain, xi: int) -> float:
    """Probability of absorption within ``xi`` steps, i.e. ``Pr[depth <= xi]``."""
    if xi < 0:
        raise ValueError("xi must be non-negative")
    for v in _distribution(chain, xi):
        pass
    return float(v[chain.absorbing])


def absorption_cdf_curve(chain: WalkChain, max_xi: int | None = None) -> np.ndarray:
    """``Pr[depth <= xi]`` for ``xi = 0, ..., max_xi`` (default ``n - 1``)."""
    if max_xi is None:
        max_xi = chain.sample.n - 1
    return np.array([v[chain.absorbing] for v in _distribution(chain, max_xi)])


def expected_steps(chain: WalkChain) -> float:
    """Mean absorption time as ``sum_{xi >= 0} (1 - Pr[depth <= xi])``.

    Every step shrinks ``r - l`` by at least one, so the walk is absorbed
    after at most ``n - 1`` steps and the sum stops there.
    """
    cdf = absorption_cdf_curve(chain, chain.sample.n - 1)
    return float(np.sum(1.0 - cdf[:-1]))


def expected_steps_fundamental(chain: WalkChain) -> float:
    """Mean absorption time from the fundamental matrix ``(I - Q)^{-1}``."""
    keep = [k for k in range(len(chain.states)) if k != chain.absorbing]
    Q = chain.P[np.ix_(keep, keep)]
    t = np.linalg.solve(np.eye(len(keep)) - Q, np.ones(len(keep)))
    return float(t[keep.index(chain.initial)])


def simulate_walk(s: SortedSample1D, i: int, rng: np.random.Generator):
    """Sample one trajectory from ``(1, n)`` to ``(i, i)``.

    Returns ``(trajectory, steps)``. Each step draws a split uniformly in
    ``[x_l, x_r]`` and routes it with the tree's ``<=`` rule.
    """
    _check(s, i)
    x = s.values
    xi = x[i - 1]
    l, r = 1, s.n
    path = [(l, r)]
    while l != r:
        a, b = x[l - 1], x[r - 1]
        split = a + rng.random() * (b - a)
        if split < xi:
            # x_{l'-1} <= split < x_{l'}
            l = int(np.searchsorted(x, split, side="right")) + 1
        else:
            # x_{r'} <= split < x_{r'+1}
            r = int(np.searchsorted(x, split, side="right"))
        path.append((l, r))
    return path, len(path) - 1


def sample_steps(s: SortedSample1D, i: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Absorption times of ``size`` independent walks."""
    return np.array([simulate_walk(s, i, rng)[1] for _ in range(size)], dtype=np.int64)
