"""Exact expected depths for isolation forests, with a seeded forest, k-NN baseline and experiments."""

__version__ = "0.1.0"

from .core import Dataset, DensityMetrics, SortedSample1D, density_metrics, load_csv, sort_and_validate
from .forest import Forest, depth_matrix, fit_forest, score, score_many
from .knn import KnnConfig, knn_score, knn_scores, rank_by_knn
from .oracle import depth_profile, expected_depth_any, expected_depth_at_sample, rank_by_depth
from .walk import build_chain, expected_steps

__all__ = [
    "Dataset", "DensityMetrics", "SortedSample1D", "density_metrics", "load_csv", "sort_and_validate",
    "Forest", "depth_matrix", "fit_forest", "score", "score_many",
    "KnnConfig", "knn_score", "knn_scores", "rank_by_knn",
    "depth_profile", "expected_depth_any", "expected_depth_at_sample", "rank_by_depth",
    "build_chain", "expected_steps",
]
