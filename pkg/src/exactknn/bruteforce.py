"""Exhaustive ("brute force") k-nearest-neighbor search.

For each query: compute the distance to every reference point, pick the k
smallest, return them in ascending order.  Queries are independent, so the
work is cut into chunks of query rows that are handed to a thread pool; each
chunk writes its own slice of the output.  Results do not depend on the
chunking or the number of workers.

Ordering is total: ascending distance, equal distances by ascending
reference index.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import (
    DimensionMismatchError,
    KnnError,
    Metric,
    NeighborTable,
    PointSet,
    reduced_block,
)


@dataclass(frozen=True)
class BfConfig:
    chunk_size: int = 256
    worker_count: int = 0  # 0 = one per CPU
    count_distance_evals: bool = True

    def __post_init__(self):
        if self.chunk_size < 1:
            raise KnnError(f"chunk_size must be >= 1, got {self.chunk_size}")
        if self.worker_count < 0:
            raise KnnError(f"worker_count must be >= 0, got {self.worker_count}")

    def workers(self) -> int:
        return self.worker_count or os.cpu_count() or 1


def check_k(k: int, m: int) -> None:
    if k < 1:
        raise KnnError(f"k must be >= 1, got k={k}")
    if k > m:
        raise KnnError(f"k={k} exceeds the number of reference points m={m}")


def _select_row(row: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    m = row.shape[0]
    if k < m:
        kth = np.partition(row, k - 1)[k - 1]
        cand = np.flatnonzero(row <= kth)
    else:
        cand = np.arange(m)
    # cand is ascending, so a stable sort leaves equal values in index order
    idx = cand[np.argsort(row[cand], kind="stable")[:k]]
    return idx, row[idx]


def select_k_smallest(row, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Indices and values of the k smallest entries of ``row``.

    Sorted by value, ties by index.  Same result as a full stable sort
    truncated to k, but only the candidates at or below the k-th smallest
    value get sorted.
    """
    row = np.asarray(row, dtype=np.float64)
    if row.ndim != 1:
        raise KnnError(f"row must be a vector, got shape {row.shape}")
    check_k(k, row.shape[0])
    if not np.isfinite(row).all():
        raise KnnError("row has non-finite values")
    return _select_row(row, k)


def select_k_smallest_rows(block: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise ``select_k_smallest`` over a 2-D block."""
    rows, m = block.shape
    part = np.argpartition(block, k - 1, axis=1)[:, :k] if k < m else np.tile(np.arange(m), (rows, 1))
    vals = np.take_along_axis(block, part, axis=1)
    if k < m:
        # argpartition picks arbitrarily among values tied with the k-th one;
        # redo those rows with the index-ordered candidate scan.
        kth = vals.max(axis=1)
        ties = np.count_nonzero(block <= kth[:, None], axis=1) > k
        for r in np.flatnonzero(ties):
            part[r], vals[r] = _select_row(block[r], k)
    order = np.lexsort((part, vals), axis=-1)
    return np.take_along_axis(part, order, axis=1), np.take_along_axis(vals, order, axis=1)


def _run_chunk(pq, pr, k, kind, start, stop, out_idx, out_red):
    block = reduced_block(pq[start:stop], pr, kind)
    idx, red = select_k_smallest_rows(block, k)
    out_idx[start:stop] = idx
    out_red[start:stop] = red
    return block.size


def bf_knn(
    Q: PointSet,
    R: PointSet,
    k: int,
    metric: Metric = Metric(),
    config: BfConfig = BfConfig(),
) -> NeighborTable:
    """Exact k nearest references for every query by exhaustive search."""
    if Q.d != R.d:
        raise DimensionMismatchError(Q.d, R.d)
    metric.check_dim(Q.d)
    check_k(k, R.n)

    pq = metric.prepare(Q.data)
    pr = metric.prepare(R.data)
    out_idx = np.empty((Q.n, k), dtype=np.int64)
    out_red = np.empty((Q.n, k), dtype=np.float64)
    bounds = [(s, min(s + config.chunk_size, Q.n)) for s in range(0, Q.n, config.chunk_size)]

    workers = min(config.workers(), len(bounds))
    if workers <= 1:
        counts = [_run_chunk(pq, pr, k, metric.kind, s, e, out_idx, out_red) for s, e in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_chunk, pq, pr, k, metric.kind, s, e, out_idx, out_red)
                for s, e in bounds
            ]
            counts = [f.result() for f in futures]

    evals = int(sum(counts)) if config.count_distance_evals else 0
    return NeighborTable(out_idx, np.ascontiguousarray(metric.finalize(out_red)), evals)


@dataclass(frozen=True)
class CostModel:
    additions: int
    multiplications: int
    comparisons: float


def bf_cost_model(n: int, m: int, d: int, k: int = 1) -> CostModel:
    """Closed-form operation counts for exhaustive search with full sorts.

    2nmd additions/subtractions and nmd multiplications for the distances,
    n * m * log2(m) comparisons for the sorts.  None of it depends on k.
    """
    for name, v in (("n", n), ("m", m), ("d", d), ("k", k)):
        if v < 1:
            raise KnnError(f"{name} must be >= 1, got {v}")
    return CostModel(
        additions=2 * n * m * d,
        multiplications=n * m * d,
        comparisons=n * m * math.log2(m),
    )
