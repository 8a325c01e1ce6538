"""
Monte Carlo experiments that tie the forest to the exact oracle.

* convergence of the forest's average depths to the oracle as trees are added,
* concentration of the average depth around its expectation,
* minimum-gap and density-factor statistics of uniform samples,
* multi-dimensional depth estimates built from 1-D oracles,
* per-point depth tables joining oracle, forest and ranking.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import __version__
from .core import Dataset, SortedSample1D, load_csv, sort_and_validate
from .errors import DimensionMismatch, InvalidParams
from .forest import forest_depths
from .oracle import depth_profile, expected_depth_any, fast_profile, rank_by_depth

GENERATORS = ("normal", "uniform", "exponential", "csv")


def derive_seed(seed: int, *path: int) -> int:
    """64-bit child seed for a job identified by ``path``."""
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), *path])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    generator: str = "uniform"
    n: int = 100
    psi: int = 100
    M_grid: tuple = tuple(range(100, 1001, 100))
    repeats: int = 10
    seed: int = 42
    path: str | None = None
    column: str | None = None

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise InvalidParams(f"generator must be one of {GENERATORS}")
        grid = tuple(int(m) for m in self.M_grid)
        if not grid or any(m < 1 for m in grid) or list(grid) != sorted(set(grid)):
            raise InvalidParams("M_grid must be a non-empty strictly ascending list of positive counts")
        object.__setattr__(self, "M_grid", grid)
        if self.repeats < 1:
            raise InvalidParams("repeats must be at least 1")
        if self.psi < 1:
            raise InvalidParams("psi must be at least 1")
        if self.generator == "csv":
            if not self.path or not self.column:
                raise InvalidParams("the csv generator needs path and column")
        elif self.n < 2:
            raise InvalidParams("n must be at least 2")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise InvalidParams(f"unknown config keys: {sorted(extra)}")
        d = dict(d)
        if "M_grid" in d:
            d["M_grid"] = tuple(d["M_grid"])
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["M_grid"] = list(self.M_grid)
        return d


def generate_sample(cfg: ExperimentConfig) -> SortedSample1D:
    """Dataset for an experiment, drawn once from the config seed."""
    if cfg.generator == "csv":
        ds = load_csv(cfg.path, [cfg.column])
        return sort_and_validate(ds.rows[:, 0])
    rng = np.random.default_rng(derive_seed(cfg.seed, 0))
    if cfg.generator == "uniform":
        x = rng.random(cfg.n)
    elif cfg.generator == "exponential":
        x = -np.log1p(-rng.random(cfg.n))
    else:
        x = rng.standard_normal(cfg.n)
    return sort_and_validate(x)


@dataclass(frozen=True)
class ConvergenceResult:
    config: ExperimentConfig
    n: int
    records: tuple  # (M, repeat, mse)

    def mse_table(self) -> np.ndarray:
        """``(len(M_grid), repeats)`` matrix of MSE values."""
        grid = self.config.M_grid
        out = np.empty((len(grid), self.config.repeats))
        pos = {m: k for k, m in enumerate(grid)}
        for M, r, v in self.records:
            out[pos[M], r] = v
        return out

    def summary(self) -> list[dict]:
        T = self.mse_table()
        r = T.shape[1]
        rows = []
        for M, vals in zip(self.config.M_grid, T):
            mean = float(vals.mean())
            if r > 1:
                half = float(stats.t.ppf(0.975, r - 1) * vals.std(ddof=1) / math.sqrt(r))
            else:
                half = 0.0
            rows.append({"M": M, "mean_mse": mean, "lo95": mean - half, "hi95": mean + half})
        return rows

    def mean_curve(self) -> np.ndarray:
        return self.mse_table().mean(axis=1)

    def is_monotone(self) -> bool:
        c = self.mean_curve()
        return bool(np.all(np.diff(c) <= 0))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["M", "repeat", "mse"])
        for M, r, v in self.records:
            w.writerow([M, r, repr(float(v))])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "format": "isodepth.convergence",
            "version": 1,
            "tool_version": __version__,
            "config": self.config.to_dict(),
            "n": self.n,
            "summary": self.summary(),
            "monotone": self.is_monotone(),
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def convergence_experiment(cfg: ExperimentConfig, n_jobs: int = 1) -> ConvergenceResult:
    """MSE between forest average depths and exact expected depths over an M grid.

    The dataset is fixed by the config seed; each repeat grows its own trees
    from a derived seed. Forests for different M within a repeat share a
    prefix of trees (tree ``m`` depends only on the seed and ``m``), so one
    forest of ``max(M_grid)`` trees yields every grid point.

    With ``psi < n`` each tree only sees its subsample, so the target is the
    oracle of that subsample evaluated at every training point, averaged over
    the same trees.
    """
    s = generate_sample(cfg)
    x = s.values
    n = s.n
    Mmax = cfg.M_grid[-1]
    records = []
    full = cfg.psi >= n
    if full:
        target_full = depth_profile(s).expected_depths
    for r in range(cfg.repeats):
        fseed = derive_seed(cfg.seed, 1, r)
        D, subs = forest_depths(x, x, Mmax, cfg.psi, fseed, n_jobs=n_jobs, return_subsamples=True)
        csum = np.cumsum(D, axis=0, dtype=np.int64)
        if not full:
            tgt = np.empty((Mmax, n))
            for m in range(Mmax):
                xs = x[subs[m]]
                tgt[m] = _interp_profile(xs, fast_profile(xs) if xs.size > 1 else np.zeros(1), x)
            tsum = np.cumsum(tgt, axis=0)
        for M in cfg.M_grid:
            emp = csum[M - 1] / M
            target = target_full if full else tsum[M - 1] / M
            records.append((M, r, float(np.mean((emp - target) ** 2))))
    records.sort(key=lambda t: (t[0], t[1]))
    return ConvergenceResult(cfg, n, tuple(records))


def _interp_profile(xs, hs, q):
    # clamp outside [x_1, x_n], linear inside
    if xs.size == 1:
        return np.zeros_like(q)
    return np.interp(q, xs, hs)


@dataclass(frozen=True)
class ConcentrationResult:
    empirical_freq: float
    hoeffding_bound: float
    epsilon: float
    M: int
    trials: int
    index: int
    oracle_depth: float
    max_deviation: float


def concentration_check(s: SortedSample1D, epsilon: float, M: int, trials: int, seed: int,
                        index: int = 1, n_jobs: int = 1) -> ConcentrationResult:
    """Frequency of ``|mean depth over M trees - expected depth| >= epsilon``.

    Trees use the full sample (``psi = n``). Trial ``t`` uses trees
    ``t*M .. (t+1)*M - 1`` of a single seeded stream.
    """
    if epsilon <= 0:
        raise InvalidParams("epsilon must be positive")
    if M < 1 or trials < 1:
        raise InvalidParams("M and trials must be positive")
    target = depth_profile(s).expected_depths[index - 1]
    q = np.array([s.values[index - 1]])
    D = forest_depths(s.values, q, M * trials, s.n, seed, n_jobs=n_jobs)[:, 0]
    means = D.reshape(trials, M).sum(axis=1, dtype=np.int64) / M
    dev = np.abs(means - target)
    freq = float(np.mean(dev >= epsilon))
    bound = 2.0 * math.exp(-2.0 * epsilon ** 2 * M / s.n ** 2)
    return ConcentrationResult(freq, bound, epsilon, M, trials, index, float(target), float(dev.max()))


@dataclass(frozen=True)
class GapStatistics:
    n: int
    trials: int
    mean_min_gap: float
    expected: float
    kappa_quantiles: dict
    frac_kappa_ge_half_sqrt_n: float

    def to_json(self) -> str:
        d = asdict(self)
        d["kappa_quantiles"] = {str(k): v for k, v in self.kappa_quantiles.items()}
        return json.dumps(d, indent=2, sort_keys=True)


KAPPA_QUANTILES = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)


def uniform_gap_statistics(n: int, trials: int, seed: int) -> GapStatistics:
    """Min adjacent gap and density factor of ``n`` i.i.d. uniform points.

    Gaps are taken over the whole sorted sample; the exact mean of the
    minimum gap is ``1 / (n**2 - 1)``.
    """
    if n < 4:
        raise InvalidParams("n must be at least 4")
    if trials < 1:
        raise InvalidParams("trials must be positive")
    rng = np.random.default_rng(derive_seed(seed, 2))
    L = np.empty(trials)
    U = np.empty(trials)
    step = max(1, 2_000_000 // n)
    for a in range(0, trials, step):
        b = min(trials, a + step)
        g = np.diff(np.sort(rng.random((b - a, n)), axis=1), axis=1)
        L[a:b] = g.min(axis=1)
        U[a:b] = g.max(axis=1)
    kappa = U / L
    q = {p: float(np.quantile(kappa, p)) for p in KAPPA_QUANTILES}
    return GapStatistics(
        n, trials, float(L.mean()), 1.0 / (n * n - 1), q,
        float(np.mean(kappa >= math.sqrt(n) / 2)),
    )


# ---------------------------------------------------------------------------
# multi-dimensional estimates
# ---------------------------------------------------------------------------


def _map_projection(X, column=0):
    return X[:, int(column)]


def _map_l1_centroid(X, centroid=None):
    c = X.mean(axis=0) if centroid is None else np.asarray(centroid, dtype=np.float64)
    return np.abs(X - c).sum(axis=1)


def _map_rbf(X, reference=None, gamma=1.0):
    ref = X.mean(axis=0) if reference is None else np.asarray(reference, dtype=np.float64)
    return np.exp(-float(gamma) * ((X - ref) ** 2).sum(axis=1))


MAPPINGS = {
    "projection": _map_projection,
    "l1_centroid": _map_l1_centroid,
    "rbf": _map_rbf,
}


def _freeze_params(X, mapping, params):
    # data-dependent defaults are resolved on the training rows only
    p = dict(params)
    if mapping == "l1_centroid" and p.get("centroid") is None:
        p["centroid"] = X.mean(axis=0)
    if mapping == "rbf" and p.get("reference") is None:
        p["reference"] = X.mean(axis=0)
    return p


def estimate_depth_multidim(data, point, mode: str = "average_projection",
                            mapping: str | None = None, params: dict | None = None) -> float:
    """Expected-depth estimate for ``d``-dimensional data from 1-D oracles.

    ``average_projection`` averages the exact 1-D expected depth of each
    coordinate. ``mapped`` sends every row through a scalar ``mapping``
    (``projection``, ``l1_centroid`` or ``rbf``) and evaluates the 1-D oracle
    at the mapped query.
    """
    X = data.rows if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    x = np.atleast_1d(np.asarray(point, dtype=np.float64))
    if x.size != X.shape[1]:
        raise DimensionMismatch(f"point has {x.size} coordinates, data has {X.shape[1]}")
    if mode == "average_projection":
        if X.shape[1] < 2:
            raise InvalidParams("average_projection needs d >= 2")
        vals = [expected_depth_any(sort_and_validate(X[:, j]), x[j]) for j in range(X.shape[1])]
        return float(math.fsum(vals) / len(vals))
    if mode == "mapped":
        if mapping not in MAPPINGS:
            raise InvalidParams(f"mapping must be one of {sorted(MAPPINGS)}")
        p = _freeze_params(X, mapping, params or {})
        phi = MAPPINGS[mapping]
        z = phi(X, **p)
        zq = float(phi(x[None, :], **p)[0])
        return expected_depth_any(sort_and_validate(z), zq)
    raise InvalidParams(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# depth tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DepthRow:
    index: int
    x: float
    oracle_depth: float
    forest_depth: float
    anomaly: bool


@dataclass(frozen=True)
class DepthTable:
    rows: tuple
    trees: int
    seed: int
    flagged: tuple = field(default=())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "x", "oracle_depth", "forest_depth", "anomaly"])
        for r in self.rows:
            w.writerow([r.index, repr(r.x), repr(r.oracle_depth), repr(r.forest_depth), int(r.anomaly)])
        return buf.getvalue()


def depth_profile_experiment(s: SortedSample1D, m_anomalies: int, trees: int = 1000,
                             seed: int = 42, n_jobs: int = 1) -> DepthTable:
    """Oracle depth, one forest run (``psi = n``) and the ``m`` shallowest flags."""
    prof = depth_profile(s)
    flagged = rank_by_depth(prof, m_anomalies)
    D = forest_depths(s.values, s.values, trees, s.n, seed, n_jobs=n_jobs)
    fd = D.sum(axis=0, dtype=np.int64) / trees
    fl = set(flagged)
    rows = tuple(
        DepthRow(i + 1, float(s.values[i]), float(prof.expected_depths[i]), float(fd[i]), (i + 1) in fl)
        for i in range(s.n)
    )
    return DepthTable(rows, trees, seed, tuple(flagged))
