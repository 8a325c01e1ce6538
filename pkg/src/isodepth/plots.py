"""Figure rendering for CLI reports. Headless (Agg); every function writes a file and returns its path."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "isodepth"

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# no timestamps or version strings, so figures are byte-stable across runs
_META = {
    "png": {"Software": None},
    "svg": {"Date": None, "Creator": None},
    "pdf": {"CreationDate": None, "Creator": None, "Producer": None},
}


def _save(fig, path):
    path = str(path)
    ext = path.rsplit(".", 1)[-1].lower()
    fig.savefig(path, metadata=_META.get(ext), dpi=100)
    plt.close(fig)
    return path


def plot_depth_profile(x, oracle, path, forest=None, flagged=()):
    """Oracle expected depth against x, optionally overlaid with forest scores."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(x, oracle, "o-", ms=3, label="expected depth")
    if forest is not None:
        ax.plot(x, forest, "x", ms=4, label="forest average")
    if len(flagged):
        idx = np.asarray(flagged) - 1
        ax.scatter(np.asarray(x)[idx], np.asarray(oracle)[idx], s=60, facecolors="none",
                   edgecolors="red", label="flagged")
    ax.set_xlabel("x")
    ax.set_ylabel("depth")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def plot_convergence(summary, path):
    """Mean MSE per tree count with its 95% band."""
    M = np.array([r["M"] for r in summary])
    mean = np.array([r["mean_mse"] for r in summary])
    lo = np.array([r["lo95"] for r in summary])
    hi = np.array([r["hi95"] for r in summary])
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.fill_between(M, lo, hi, alpha=0.3)
    ax.plot(M, mean, "o-", ms=3)
    ax.set_xlabel("number of trees")
    ax.set_ylabel("MSE vs expected depth")
    fig.tight_layout()
    return _save(fig, path)


def plot_scores(values, scores, path, ylabel="score"):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(np.arange(1, len(scores) + 1) if values is None else values, scores, "o", ms=3)
    ax.set_xlabel("row" if values is None else "x")
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    return _save(fig, path)
