"""Exact k-nearest-neighbor search over a kd-tree.

Construction splits each node at the median of its widest coordinate
(max - min spread).  Points are ordered by (coordinate, index) and the left
child takes the first half, so duplicate-heavy data still splits evenly and
depth stays logarithmic.  Reference rows are permuted so every leaf is a
contiguous slice of ``tree.points``.

Search is depth-first, nearer child first, keeping the best k candidates in
a max-root heap keyed on (distance, index).  A subtree is skipped only when
its bounding box cannot hold a candidate that beats the current k-th best
under the (distance, index) order, so results equal the brute-force ones
exactly, tie order included.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .bruteforce import check_k
from .core import (
    DimensionMismatchError,
    KnnError,
    Metric,
    MetricKind,
    NeighborTable,
    PointSet,
    reduced_to_one,
)

DEFAULT_LEAF_SIZE = 16

_PRUNABLE = (MetricKind.EUCLIDEAN, MetricKind.MANHATTAN, MetricKind.CHEBYSHEV)


@dataclass(frozen=True, eq=False)
class KdTree:
    """Flat-array kd-tree.

    Node ``i`` covers ``perm[start[i]:stop[i]]``.  Internal nodes have
    ``left[i] >= 0`` and split on ``split_dim[i]`` at ``split_value[i]``;
    leaves have ``left[i] == right[i] == -1``.  ``lo``/``hi`` are the tight
    bounding boxes of each node's points and ``min_index`` the smallest
    original reference index below each node.
    """

    reference: PointSet
    leaf_size: int
    perm: np.ndarray
    points: np.ndarray
    split_dim: np.ndarray
    split_value: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    stop: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    min_index: np.ndarray
    depth: int

    @property
    def d(self) -> int:
        return self.reference.d

    @property
    def node_count(self) -> int:
        return self.left.shape[0]

    def is_leaf(self, node: int) -> bool:
        return self.left[node] < 0

    def leaves(self) -> list[int]:
        return [i for i in range(self.node_count) if self.left[i] < 0]

    def leaf_indices(self, node: int) -> np.ndarray:
        return self.perm[self.start[node] : self.stop[node]]

    def __post_init__(self):
        # plain-list mirrors for scalar access in the query loop
        for name in ("left", "right", "split_dim", "split_value", "start", "stop", "min_index"):
            object.__setattr__(self, name + "_list", getattr(self, name).tolist())

    def same_structure(self, other: "KdTree") -> bool:
        fields = ("perm", "split_dim", "split_value", "left", "right", "start", "stop")
        return self.leaf_size == other.leaf_size and all(
            np.array_equal(getattr(self, f), getattr(other, f)) for f in fields
        )


def build_kdtree(R: PointSet, leaf_size: int = DEFAULT_LEAF_SIZE) -> KdTree:
    if leaf_size < 1:
        raise KnnError(f"leaf_size must be >= 1, got {leaf_size}")
    if R.n < 1:
        raise KnnError("cannot build a kd-tree over an empty point set")
    data = R.data
    perm = np.arange(R.n, dtype=np.int64)

    split_dim, split_value, left, right, start, stop = [], [], [], [], [], []
    lo, hi, min_index = [], [], []
    max_depth = 0

    def new_node(s, e):
        pts = data[perm[s:e]]
        split_dim.append(-1)
        split_value.append(0.0)
        left.append(-1)
        right.append(-1)
        start.append(s)
        stop.append(e)
        lo.append(pts.min(axis=0))
        hi.append(pts.max(axis=0))
        min_index.append(int(perm[s:e].min()))
        return len(left) - 1

    # explicit stack; depth-first, left before right
    root = new_node(0, R.n)
    stack = [(root, 0)]
    while stack:
        node, depth = stack.pop()
        max_depth = max(max_depth, depth)
        s, e = start[node], stop[node]
        if e - s <= leaf_size:
            continue
        spread = hi[node] - lo[node]
        dim = int(np.argmax(spread))  # first widest on ties
        idx = perm[s:e]
        coord = data[idx, dim]
        order = np.lexsort((idx, coord))
        perm[s:e] = idx[order]
        mid = s + (e - s) // 2
        split_dim[node] = dim
        split_value[node] = float(data[perm[mid], dim])
        lchild = new_node(s, mid)
        rchild = new_node(mid, e)
        left[node] = lchild
        right[node] = rchild
        stack.append((rchild, depth + 1))
        stack.append((lchild, depth + 1))

    return KdTree(
        reference=R,
        leaf_size=leaf_size,
        perm=perm,
        points=np.ascontiguousarray(data[perm]),
        split_dim=np.array(split_dim, dtype=np.int64),
        split_value=np.array(split_value, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        start=np.array(start, dtype=np.int64),
        stop=np.array(stop, dtype=np.int64),
        lo=np.array(lo, dtype=np.float64),
        hi=np.array(hi, dtype=np.float64),
        min_index=np.array(min_index, dtype=np.int64),
        depth=max_depth,
    )


def _box_bounds(q: np.ndarray, lo: np.ndarray, hi: np.ndarray, kind: MetricKind) -> np.ndarray:
    """Lower bounds on the reduced distance from q to each box [lo[i], hi[i]].

    Gaps are formed with the same subtraction a point distance would use and
    rounding is monotone, so a bound never exceeds a computed distance to a
    point inside the box.
    """
    gap = np.maximum(np.maximum(lo - q, q - hi), 0.0)
    if kind is MetricKind.CHEBYSHEV:
        return gap.max(axis=1)
    terms = gap if kind is MetricKind.MANHATTAN else gap * gap
    return np.add.accumulate(terms, axis=1)[:, -1]


def _query_one(tree: KdTree, q: np.ndarray, k: int, kind: MetricKind):
    # heap entries are (-reduced, -index): the root is the worst candidate
    heap: list[tuple[float, int]] = []
    evals = 0
    left, right = tree.left_list, tree.right_list
    split_dim, split_value = tree.split_dim_list, tree.split_value_list
    start, stop, min_index = tree.start_list, tree.stop_list, tree.min_index_list
    bounds = _box_bounds(q, tree.lo, tree.hi, kind).tolist()
    qv = q.tolist()

    stack = [0]
    while stack:
        node = stack.pop()
        if len(heap) == k:
            bound = bounds[node]
            worst_d, worst_i = -heap[0][0], -heap[0][1]
            # a point tied with the worst can still win on a smaller index
            if bound > worst_d or (bound == worst_d and min_index[node] > worst_i):
                continue
        if left[node] < 0:
            s, e = start[node], stop[node]
            red = reduced_to_one(q, tree.points[s:e], kind)
            evals += e - s
            ids = tree.perm[s:e]
            if len(heap) == k:
                keep = np.flatnonzero(red <= -heap[0][0])
                red, ids = red[keep], ids[keep]
            for item in zip((-red).tolist(), (-ids).tolist()):
                if len(heap) < k:
                    heapq.heappush(heap, item)
                elif item > heap[0]:
                    heapq.heapreplace(heap, item)
            continue
        if qv[split_dim[node]] <= split_value[node]:
            stack.append(right[node])
            stack.append(left[node])
        else:
            stack.append(left[node])
            stack.append(right[node])

    best = sorted((-nd, -ni) for nd, ni in heap)
    return [i for _, i in best], [dv for dv, _ in best], evals


def kdtree_knn(tree: KdTree, Q: PointSet, k: int, metric: Metric = Metric()) -> NeighborTable:
    """Exact kNN of every query row; identical output to ``bf_knn``."""
    if metric.kind not in _PRUNABLE:
        raise KnnError(
            f"kd-tree search does not support the {metric.kind.value} metric; use bf_knn"
        )
    if Q.d != tree.d:
        raise DimensionMismatchError(Q.d, tree.d, "queries and tree")
    check_k(k, tree.reference.n)
    out_idx = np.empty((Q.n, k), dtype=np.int64)
    out_red = np.empty((Q.n, k), dtype=np.float64)
    evals = 0
    for i in range(Q.n):
        idx, red, ev = _query_one(tree, Q.data[i], k, metric.kind)
        out_idx[i] = idx
        out_red[i] = red
        evals += ev
    return NeighborTable(out_idx, np.ascontiguousarray(metric.finalize(out_red)), evals)


@dataclass(frozen=True)
class KdTreeStats:
    node_count: int
    depth: int
    mean_leaf_occupancy: float
    leaf_count: int


def kdtree_stats(tree: KdTree) -> KdTreeStats:
    leaves = tree.leaves()
    sizes = tree.stop[leaves] - tree.start[leaves]
    return KdTreeStats(
        node_count=tree.node_count,
        depth=tree.depth,
        mean_leaf_occupancy=float(sizes.mean()),
        leaf_count=len(leaves),
    )


def depth_bound(m: int, leaf_size: int) -> int:
    """ceil(log2(m / leaf_size)), floored at 0: depth of a perfect median split."""
    return max(0, math.ceil(math.log2(m / leaf_size))) if m > leaf_size else 0
