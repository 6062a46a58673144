"""Exact k-nearest-neighbor search: brute force, kd-tree, and kNN applications."""

from .applications import DescriptorDatabase, LabeledSet, VoteTally, knn_classify, retrieve_vote
from .bench import (
    BenchmarkConfig,
    BenchmarkReport,
    fit_dimension_slope,
    generate_uniform,
    run_grid,
)
from .bruteforce import BfConfig, bf_cost_model, bf_knn, select_k_smallest
from .core import (
    DimensionMismatchError,
    KnnError,
    Metric,
    MetricKind,
    NeighborTable,
    PointSet,
    distance,
    pairwise_distances,
)
from .entropy import EntropyEstimate, digamma, kl_entropy, rho_k, unit_ball_volume
from .kdtree import KdTree, build_kdtree, kdtree_knn, kdtree_stats

__version__ = "0.1.0"
