"""
Anomaly archetypes on the line and when each detector catches them.

Three archetypes are covered: a single point left of the normal block
(marginal single), a single point in a gap between two normal blocks
(central single) and a small cluster left of the normal block (marginal
clustered). For each, a predictor compares the observed separation gap
against a detector-specific threshold, and constructors build the datasets
used to probe those thresholds.

Thresholds known only up to order (``sqrt(n0 * kappa)``, ``n1**2 * kappa``,
``k * delta``) take a constant ``c``. Defaults come from a bisection sweep
against the exact oracle (or exact k-NN scores), stored in
``calibration.json`` and reproducible with :func:`run_calibration`.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np

from .core import Dataset, DensityMetrics, SortedSample1D, density_metrics, merge_metrics
from .errors import (
    EvenN1,
    InvalidParams,
    NotEnoughPoints,
    OddN0,
)
from .knn import KnnConfig, knn_scores
from .oracle import fast_profile

ANOMALY_TYPES = ("marginal_single", "central_single", "marginal_clustered")
DETECTORS = ("iforest", "knn")
CASE_KINDS = (
    "marginal_single",
    "central_single",
    "marginal_clustered",
    "counterexample_marginal",
    "counterexample_central",
    "counterexample_clustered",
)


def load_calibration() -> dict:
    text = resources.files(__package__).joinpath("calibration.json").read_text()
    return json.loads(text)


def default_constant(anomaly_type: str, detector: str) -> float:
    return float(load_calibration()["constants"][f"{anomaly_type}.{detector}"])


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdReport:
    anomaly_type: str
    detector: str
    observed_gap: float
    threshold: float
    decision: bool
    verdict: str
    basis: str
    inputs: dict = field(default_factory=dict)
    warnings: tuple = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["warnings"] = list(self.warnings)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _inputs(metrics: DensityMetrics, **counts):
    d = metrics.to_dict()
    d.update({k: v for k, v in counts.items() if v is not None})
    return d


def predict_marginal_single_iforest(metrics: DensityMetrics, gap: float) -> ThresholdReport:
    """Guaranteed detection iff ``gap > U * kappa``; below it detection may still fail."""
    if gap <= 0:
        raise InvalidParams("gap must be positive")
    thr = metrics.U * metrics.kappa
    hit = gap > thr
    return ThresholdReport(
        "marginal_single", "iforest", float(gap), thr, hit,
        "detected" if hit else "not guaranteed", "exact-sufficient",
        _inputs(metrics),
    )


def predict_marginal_single_knn(metrics: DensityMetrics, gap: float, k: int) -> ThresholdReport:
    """k-NN detects exactly when ``gap > U + (k - 1) * delta / 2``."""
    if gap <= 0:
        raise InvalidParams("gap must be positive")
    if k < 1:
        raise InvalidParams("k must be at least 1")
    thr = metrics.U + (k - 1) * metrics.delta / 2
    hit = gap > thr
    return ThresholdReport(
        "marginal_single", "knn", float(gap), thr, hit,
        "detected" if hit else "not detected", "exact",
        _inputs(metrics, k=k),
    )


def predict_central_single(detector: str, metrics: DensityMetrics, theta: float, n0: int,
                           k: int | None = None, c: float | None = None) -> ThresholdReport:
    """Central single anomaly; ``theta`` is the smaller of its two gaps.

    iForest: ``c * sqrt(n0 * kappa)``. k-NN: the worst-case bound
    ``(k'+1)/2 * U - (k'/2 - 1)/2 * L`` with ``k'`` the even number at or
    above ``k``, unless ``c`` is given, in which case ``c * k * delta``.
    """
    if n0 % 2:
        raise OddN0(f"n0 must be even, got {n0}")
    warnings = []
    if detector == "iforest":
        if c is None:
            c = default_constant("central_single", "iforest")
            basis = "calibrated"
        else:
            basis = "user-constant"
        thr = c * math.sqrt(n0 * metrics.kappa)
    elif detector == "knn":
        if k is None or k < 1:
            raise InvalidParams("k-NN prediction needs k >= 1")
        if c is None:
            ke = k + (k % 2)
            thr = (ke + 1) / 2 * metrics.U - (ke / 2 - 1) / 2 * metrics.L
            basis = "exact-worst-case" if ke == k else "worst-case-bound(k+1)"
        else:
            thr = c * k * metrics.delta
            basis = "user-constant"
            if metrics.delta == 0:
                warnings.append("delta = 0: a threshold proportional to k*delta carries no information")
    else:
        raise InvalidParams(f"unknown detector {detector!r}")
    hit = theta > thr
    return ThresholdReport(
        "central_single", detector, float(theta), float(thr), hit,
        "detected" if hit else "not detected", basis,
        _inputs(metrics, n0=n0, k=k, c=c), tuple(warnings),
    )


def predict_marginal_clustered(detector: str, metrics: DensityMetrics, theta: float, n1: int,
                               k: int | None = None, c: float | None = None) -> ThresholdReport:
    """Cluster of ``n1`` points separated by ``theta`` from the normal block.

    iForest: ``c * n1**2 * kappa`` (``n1`` odd). k-NN: ``c * k * delta``,
    meaningful only for ``k`` well above ``n1``.
    """
    warnings = []
    if detector == "iforest":
        if n1 % 2 == 0:
            raise EvenN1(f"n1 must be odd, got {n1}")
        basis = "user-constant" if c is not None else "calibrated"
        if c is None:
            c = default_constant("marginal_clustered", "iforest")
        thr = c * n1 ** 2 * metrics.kappa
    elif detector == "knn":
        if k is None or k < 1:
            raise InvalidParams("k-NN prediction needs k >= 1")
        basis = "user-constant" if c is not None else "calibrated"
        if c is None:
            c = default_constant("marginal_clustered", "knn")
        thr = c * k * metrics.delta
        if k <= n1:
            warnings.append(f"k={k} <= n1={n1}: neighbours stay inside the cluster, "
                            "so k-NN can miss it at any separation")
        if metrics.delta == 0:
            warnings.append("delta = 0: a threshold proportional to k*delta carries no information")
    else:
        raise InvalidParams(f"unknown detector {detector!r}")
    hit = theta > thr
    return ThresholdReport(
        "marginal_clustered", detector, float(theta), float(thr), hit,
        "detected" if hit else "not detected", basis,
        _inputs(metrics, n1=n1, k=k, c=c), tuple(warnings),
    )


# ---------------------------------------------------------------------------
# assumption check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AssumptionCheck:
    kappa: float
    bound: float
    passed: bool


def verify_assumption(s: SortedSample1D) -> AssumptionCheck:
    """Is the full-range density factor at least ``sqrt(n + 3)``?"""
    if s.n < 3:
        raise NotEnoughPoints("the density-factor check needs at least three points")
    kappa = density_metrics(s).kappa
    bound = math.sqrt(s.n + 3)
    return AssumptionCheck(kappa, bound, kappa >= bound)


@dataclass(frozen=True)
class ColumnCheck:
    column: str
    n: int
    kappa: float
    bound: float
    passed: bool
    valid: bool


@dataclass(frozen=True)
class AssumptionSummary:
    columns: tuple
    successful: int
    valid: int
    total: int


def verify_dataset(data: Dataset) -> AssumptionSummary:
    """Check every column; repeated values or fewer than 3 rows make it invalid."""
    rows = []
    for j, name in enumerate(data.column_names):
        col = data.rows[:, j]
        n = col.size
        bound = math.sqrt(n + 3)
        v = np.sort(col)
        if n < 3 or np.any(np.diff(v) == 0):
            rows.append(ColumnCheck(name, n, float("nan"), bound, False, False))
            continue
        chk = verify_assumption(SortedSample1D(v))
        rows.append(ColumnCheck(name, n, chk.kappa, chk.bound, chk.passed, True))
    return AssumptionSummary(
        tuple(rows),
        sum(r.passed for r in rows),
        sum(r.valid for r in rows),
        len(rows),
    )


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Case:
    kind: str
    sample: SortedSample1D
    anomalies: tuple
    params: dict

    @property
    def normals(self) -> tuple:
        a = set(self.anomalies)
        return tuple(i for i in range(1, self.sample.n + 1) if i not in a)


def dense_gaps(count: int, U: float = 1.0, kappa: float = 1.0, pattern: str = "alternating") -> list:
    """``count`` gaps in ``[U / kappa, U]`` hitting both ends when ``count >= 2``."""
    if count < 0 or U <= 0 or kappa < 1:
        raise InvalidParams("need count >= 0, U > 0, kappa >= 1")
    L = U / kappa
    if count == 0:
        return []
    if pattern == "equal" or kappa == 1:
        return [U] * count
    if pattern == "alternating":
        return [U if k % 2 == 0 else L for k in range(count)]
    if pattern == "alternating_low":
        return [L if k % 2 == 0 else U for k in range(count)]
    if pattern == "ramp":
        return list(np.linspace(L, U, count)) if count > 1 else [U]
    if pattern == "ramp_down":
        return list(np.linspace(U, L, count)) if count > 1 else [U]
    if pattern == "low_then_high":
        return [L] + [U] * (count - 1)
    if pattern == "high_then_low":
        return [U] * (count - 1) + [L]
    raise InvalidParams(f"unknown gap pattern {pattern!r}")


def _need(params, *names):
    missing = [n for n in names if n not in params]
    if missing:
        raise InvalidParams(f"missing parameters: {', '.join(missing)}")


def construct_case(kind: str, **params) -> Case:
    """Deterministic dataset for one archetype, anchored at 0.

    ========================  ==================================================
    kind                      parameters (defaults)
    ========================  ==================================================
    marginal_single           n, anomaly_gap, normal_gap=1, kappa=1, pattern
    central_single            n0 (even), theta, normal_gap=1, kappa=1, pattern
    marginal_clustered        n1 (odd), n0, theta, normal_gap=1, cluster_gap=1
    counterexample_marginal   n, U=1, eps=0.01*U
    counterexample_central    n0 (even), theta
    counterexample_clustered  n1 (odd), n0, theta
    ========================  ==================================================
    """
    p = dict(params)
    if kind == "marginal_single":
        _need(p, "n", "anomaly_gap")
        n = int(p["n"])
        if n < 3:
            raise InvalidParams("marginal_single needs n >= 3")
        gaps = [p["anomaly_gap"]] + dense_gaps(n - 2, p.get("normal_gap", 1.0), p.get("kappa", 1.0),
                                               p.get("pattern", "alternating"))
        anomalies = (1,)
    elif kind in ("central_single", "counterexample_central"):
        _need(p, "n0", "theta")
        n0 = int(p["n0"])
        if n0 % 2:
            raise OddN0(f"n0 must be even, got {n0}")
        if n0 < 2:
            raise InvalidParams("n0 must be at least 2")
        h = n0 // 2 - 1
        if kind == "central_single":
            U, kap, pat = p.get("normal_gap", 1.0), p.get("kappa", 1.0), p.get("pattern", "alternating")
        else:
            U, kap, pat = 1.0, 1.0, "equal"
        side = dense_gaps(h, U, kap, pat)
        th = p["theta"]
        gaps = side + [th, th] + side[::-1]
        anomalies = (n0 // 2 + 1,)
    elif kind in ("marginal_clustered", "counterexample_clustered"):
        _need(p, "n1", "n0", "theta")
        n1, n0 = int(p["n1"]), int(p["n0"])
        if n1 % 2 == 0:
            raise EvenN1(f"n1 must be odd, got {n1}")
        if n0 < 2:
            raise InvalidParams("n0 must be at least 2")
        if kind == "marginal_clustered":
            cg, ng = p.get("cluster_gap", 1.0), p.get("normal_gap", 1.0)
        else:
            cg = ng = 1.0
        gaps = [cg] * (n1 - 1) + [p["theta"]] + [ng] * (n0 - 1)
        anomalies = tuple(range(1, n1 + 1))
    elif kind == "counterexample_marginal":
        _need(p, "n")
        n = int(p["n"])
        if n < 4:
            raise InvalidParams("counterexample_marginal needs n >= 4")
        U = float(p.get("U", 1.0))
        eps = float(p.get("eps", 0.01 * U))
        gaps = [U + eps, U / 2] + [U] * (n - 3)
        anomalies = (1,)
    else:
        raise InvalidParams(f"unknown case kind {kind!r}")
    if any(g <= 0 for g in gaps):
        raise InvalidParams("all gaps must be positive")
    return Case(kind, SortedSample1D.from_gaps(gaps), anomalies, p)


def case_metrics(case: Case) -> DensityMetrics:
    """Density metrics of the normal block(s) of a constructed case."""
    n = case.sample.n
    if case.kind in ("marginal_single", "counterexample_marginal"):
        return density_metrics(case.sample, 2, n - 1)
    if case.kind in ("central_single", "counterexample_central"):
        a = case.anomalies[0]
        ranges = [r for r in ((1, a - 2), (a + 1, n - 1)) if r[0] <= r[1]]
        return merge_metrics(case.sample, ranges)
    n1 = len(case.anomalies)
    ranges = [r for r in ((1, n1 - 1), (n1 + 1, n - 1)) if r[0] <= r[1]]
    return merge_metrics(case.sample, ranges)


def case_gap(case: Case) -> float:
    """Separation gap of the anomalies from the normal points."""
    g = case.sample.gaps
    if case.kind in ("central_single", "counterexample_central"):
        a = case.anomalies[0]
        return float(min(g[a - 2], g[a - 1]))
    return float(g[len(case.anomalies) - 1])


def case_report(case: Case, detector: str, k: int | None = None, c: float | None = None) -> ThresholdReport:
    m = case_metrics(case)
    theta = case_gap(case)
    if case.kind in ("marginal_single", "counterexample_marginal"):
        if detector == "iforest":
            return predict_marginal_single_iforest(m, theta)
        if k is None:
            raise InvalidParams("k-NN prediction needs k")
        return predict_marginal_single_knn(m, theta, k)
    if case.kind in ("central_single", "counterexample_central"):
        return predict_central_single(detector, m, theta, case.sample.n - 1, k, c)
    return predict_marginal_clustered(detector, m, theta, len(case.anomalies), k, c)


# ---------------------------------------------------------------------------
# detection by the exact scores
# ---------------------------------------------------------------------------


def _split_mask(n, anomalies):
    mask = np.zeros(n, bool)
    mask[[i - 1 for i in anomalies]] = True
    if mask.all() or not mask.any():
        raise InvalidParams("need at least one anomaly and one normal point")
    return mask


def iforest_detects(sample: SortedSample1D, anomalies, depths=None) -> bool:
    """Every anomaly is strictly shallower than every normal point."""
    h = fast_profile(sample.values) if depths is None else np.asarray(depths)
    a = _split_mask(sample.n, anomalies)
    return bool(h[a].max() < h[~a].min())


def knn_detects(sample: SortedSample1D, anomalies, k: int) -> bool:
    """Every anomaly scores strictly higher than every normal point."""
    s = knn_scores(sample.values, KnnConfig(k, exclude_self=True))
    a = _split_mask(sample.n, anomalies)
    return bool(s[a].min() > s[~a].max())


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------


def flip_point(detects, lo: float = 1e-3, hi: float = 1e6, rtol: float = 1e-6) -> float:
    """Smallest separation (to ``rtol``) at which ``detects(theta)`` turns true.

    Bisection in log space; assumes detection is monotone in ``theta``.
    """
    if not detects(hi):
        return math.inf
    if detects(lo):
        return lo
    while hi / lo > 1 + rtol:
        mid = math.sqrt(lo * hi)
        if detects(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _central_family(n0, kappa, theta):
    side = dense_gaps(n0 // 2 - 1, kappa, kappa, "alternating")
    return SortedSample1D.from_gaps(side + [theta, theta] + side[::-1])


def _clustered_family(n1, n0, kappa, theta):
    cl = dense_gaps(n1 - 1, kappa, kappa, "alternating")
    no = dense_gaps(n0 - 1, kappa, kappa, "alternating")
    return SortedSample1D.from_gaps(cl + [theta] + no)


def _knn_clustered_family(n1, n0, k, delta, theta):
    # worst case for k-NN: tight gaps near the cluster, loose gaps at the far end
    L, U = 1.0, 1.0 + delta
    near = max(k - n1 - 2, 0)
    far = n0 - 1 - near
    return SortedSample1D.from_gaps([L] * (n1 - 1) + [theta] + [L] * near + [U] * far)


CALIBRATION_GRID = {
    "central_single.iforest": {"n0": [50, 100, 200, 400], "kappa": [1.0, 2.0, 4.0]},
    "marginal_clustered.iforest": {"n1": [3, 5, 7], "n0": [100, 300], "kappa": [1.0, 2.0, 4.0]},
    "marginal_clustered.knn": {"n1": [3, 5], "n0": [200], "k_over_n1": [2, 4, 8], "delta": [0.5, 1.0, 2.0]},
}


def run_calibration(grid: dict | None = None, rtol: float = 1e-6) -> dict:
    """Sweep the threshold families and return constants plus per-cell flips.

    Each shipped constant is the largest observed ``theta* / scale`` over its
    grid, so the calibrated threshold is sufficient on every swept cell.
    """
    grid = grid or CALIBRATION_GRID
    cells = {}

    g = grid["central_single.iforest"]
    rows = []
    for n0 in g["n0"]:
        for kap in g["kappa"]:
            a = n0 // 2 + 1
            t = flip_point(lambda th: iforest_detects(_central_family(n0, kap, th), (a,)), rtol=rtol)
            s = _central_family(n0, kap, 1.0)
            k_obs = merge_metrics(s, [(1, a - 2), (a + 1, s.n - 1)]).kappa
            rows.append({"n0": n0, "kappa": k_obs, "theta_flip": t,
                         "ratio": t / math.sqrt(n0 * k_obs)})
    cells["central_single.iforest"] = rows

    g = grid["marginal_clustered.iforest"]
    rows = []
    for n1 in g["n1"]:
        for n0 in g["n0"]:
            for kap in g["kappa"]:
                an = tuple(range(1, n1 + 1))
                t = flip_point(lambda th: iforest_detects(_clustered_family(n1, n0, kap, th), an), rtol=rtol)
                s = _clustered_family(n1, n0, kap, 1.0)
                k_obs = merge_metrics(s, [(1, n1 - 1), (n1 + 1, s.n - 1)]).kappa
                rows.append({"n1": n1, "n0": n0, "kappa": k_obs, "theta_flip": t,
                             "ratio": t / (n1 ** 2 * k_obs)})
    cells["marginal_clustered.iforest"] = rows

    g = grid["marginal_clustered.knn"]
    rows = []
    for n1 in g["n1"]:
        for n0 in g["n0"]:
            for mult in g["k_over_n1"]:
                k = mult * n1 + 1
                for dl in g["delta"]:
                    an = tuple(range(1, n1 + 1))
                    t = flip_point(lambda th: knn_detects(_knn_clustered_family(n1, n0, k, dl, th), an, k),
                                   rtol=rtol)
                    rows.append({"n1": n1, "n0": n0, "k": k, "delta": dl, "theta_flip": t,
                                 "ratio": t / (k * dl)})
    cells["marginal_clustered.knn"] = rows

    constants = {key: max(r["ratio"] for r in rows) for key, rows in cells.items()}
    return {"version": 1, "constants": constants, "grid": grid, "cells": cells}
