"""Point sets, distance metrics and pairwise distance evaluation.

Every distance in the package is produced by the same kernel: per-coordinate
differences accumulated sequentially over the coordinates, in index order.
The brute-force engine, the kd-tree leaf scans and the scalar ``distance``
therefore agree bit for bit, which is what lets the search methods be
compared for exact equality.

Euclidean and Mahalanobis searches rank on the *reduced* distance (squared
norm); ``finalize`` applies the square root to values that are reported.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

#: Upper bound on the number of entries ``pairwise_distances`` will allocate.
DEFAULT_MAX_ENTRIES = 1 << 26


class KnnError(ValueError):
    """A call violated an operation's contract (bad k, bad shapes, ...)."""


class DimensionMismatchError(KnnError):
    def __init__(self, left: int, right: int, what: str = "point sets"):
        super().__init__(f"dimension mismatch between {what}: {left} != {right}")
        self.left = left
        self.right = right


class MemoryBudgetError(KnnError):
    """Raised when a full distance matrix would exceed the configured budget."""


def _as_matrix(data) -> np.ndarray:
    arr = np.array(data, dtype=np.float64, copy=True)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise KnnError(f"point data must be 2-dimensional, got ndim={arr.ndim}")
    return np.ascontiguousarray(arr)


@dataclass(frozen=True, eq=False)
class PointSet:
    """Immutable n x d matrix of float64 coordinates, one point per row.

    A 1-D input is read as n points in one dimension.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = _as_matrix(self.data)
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise KnnError(f"point set must have n >= 1 and d >= 1, got shape {arr.shape}")
        bad = ~np.isfinite(arr)
        if bad.any():
            row, col = np.argwhere(bad)[0]
            raise KnnError(f"non-finite coordinate at row {row}, column {col}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def __len__(self) -> int:
        return self.n

    def row(self, i: int) -> np.ndarray:
        return self.data[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointSet):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(
            np.array_equal(self.data.view(np.uint64), other.data.view(np.uint64))
        )

    __hash__ = None


class MetricKind(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    MANHATTAN = "manhattan"
    CHEBYSHEV = "chebyshev"
    MAHALANOBIS = "mahalanobis"


@dataclass(frozen=True, eq=False)
class Metric:
    """Distance function choice.

    For Mahalanobis, ``matrix`` is the symmetric positive-definite inverse
    covariance M.  Its Cholesky factor L (M = L L^T) is computed once; points
    are mapped to ``x @ L`` and compared with the Euclidean kernel, so that
    ``(a - b)^T M (a - b) = |aL - bL|^2``.
    """

    kind: MetricKind = MetricKind.EUCLIDEAN
    matrix: Optional[np.ndarray] = None
    _factor: Optional[np.ndarray] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        kind = MetricKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is not MetricKind.MAHALANOBIS:
            if self.matrix is not None:
                raise KnnError(f"{kind.value} metric takes no matrix")
            return
        if self.matrix is None:
            raise KnnError("mahalanobis metric requires a matrix")
        m = np.array(self.matrix, dtype=np.float64, copy=True)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise KnnError(f"mahalanobis matrix must be square, got shape {m.shape}")
        if not np.isfinite(m).all():
            raise KnnError("mahalanobis matrix has non-finite entries")
        scale = max(np.abs(m).max(), np.finfo(float).tiny)
        if np.abs(m - m.T).max() > 1e-12 * scale:
            raise KnnError("mahalanobis matrix is not symmetric")
        try:
            factor = np.linalg.cholesky(0.5 * (m + m.T))
        except np.linalg.LinAlgError as exc:
            raise KnnError("mahalanobis matrix is not positive definite") from exc
        m.setflags(write=False)
        factor.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "_factor", factor)

    @classmethod
    def euclidean(cls) -> "Metric":
        return cls(MetricKind.EUCLIDEAN)

    @classmethod
    def manhattan(cls) -> "Metric":
        return cls(MetricKind.MANHATTAN)

    @classmethod
    def chebyshev(cls) -> "Metric":
        return cls(MetricKind.CHEBYSHEV)

    @classmethod
    def mahalanobis(cls, matrix) -> "Metric":
        return cls(MetricKind.MAHALANOBIS, matrix)

    @property
    def squared(self) -> bool:
        """True when the reduced distance is the square of the reported one."""
        return self.kind in (MetricKind.EUCLIDEAN, MetricKind.MAHALANOBIS)

    @property
    def dim(self) -> Optional[int]:
        return None if self.matrix is None else self.matrix.shape[0]

    def check_dim(self, d: int) -> None:
        if self.dim is not None and self.dim != d:
            raise DimensionMismatchError(self.dim, d, "mahalanobis matrix and points")

    def prepare(self, x: np.ndarray) -> np.ndarray:
        """Map raw coordinates into the space the kernel compares in.

        Identity except for Mahalanobis, where rows are multiplied by the
        Cholesky factor with a fixed, sequential accumulation order.
        """
        if self.kind is not MetricKind.MAHALANOBIS:
            return x
        self.check_dim(x.shape[1])
        factor = self._factor
        out = np.zeros(x.shape, dtype=np.float64)
        for i in range(x.shape[1]):
            out += x[:, i, None] * factor[i][None, :]
        return out

    def finalize(self, reduced):
        """Convert reduced distances to reported distances."""
        return np.sqrt(reduced) if self.squared else reduced

    def __eq__(self, other) -> bool:
        if not isinstance(other, Metric):
            return NotImplemented
        if self.kind is not other.kind:
            return False
        if self.matrix is None:
            return True
        return bool(np.array_equal(self.matrix, other.matrix))

    __hash__ = None

    def __str__(self) -> str:
        return self.kind.value


def reduced_block(queries: np.ndarray, refs: np.ndarray, kind: MetricKind) -> np.ndarray:
    """Reduced distances between prepared query rows and prepared reference rows.

    Columns are accumulated one at a time, vectorised over the (query, ref)
    pairs, so each entry sees the same sequence of floating-point operations
    no matter how the rows are blocked.
    """
    acc = np.zeros((queries.shape[0], refs.shape[0]), dtype=np.float64)
    for c in range(queries.shape[1]):
        diff = queries[:, c, None] - refs[None, :, c]
        if kind is MetricKind.CHEBYSHEV:
            np.maximum(acc, np.abs(diff, out=diff), out=acc)
        elif kind is MetricKind.MANHATTAN:
            acc += np.abs(diff, out=diff)
        else:
            acc += diff * diff
    return acc


def reduced_to_one(query: np.ndarray, refs: np.ndarray, kind: MetricKind) -> np.ndarray:
    """Reduced distances from one prepared query to a (small) block of refs.

    Row-wise ``cumsum`` is a strictly sequential accumulation, so this matches
    ``reduced_block`` bit for bit while avoiding a Python loop over columns.
    """
    diff = refs - query
    if kind is MetricKind.CHEBYSHEV:
        return np.abs(diff).max(axis=1)
    if kind is MetricKind.MANHATTAN:
        terms = np.abs(diff)
    else:
        terms = diff * diff
    return np.add.accumulate(terms, axis=1)[:, -1]


def _vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise KnnError(f"{name} must be a vector, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise KnnError(f"{name} has non-finite coordinates")
    return arr


def distance(a, b, metric: Metric = Metric()) -> float:
    """Distance between two d-vectors under ``metric``."""
    a = _vector(a, "a")
    b = _vector(b, "b")
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatchError(a.shape[0], b.shape[0], "vectors")
    metric.check_dim(a.shape[0])
    pa = metric.prepare(a[None, :])
    pb = metric.prepare(b[None, :])
    reduced = reduced_block(pa, pb, metric.kind)[0, 0]
    return float(metric.finalize(reduced))


def pairwise_distances(
    Q: PointSet,
    R: PointSet,
    metric: Metric = Metric(),
    max_entries: int = DEFAULT_MAX_ENTRIES,
) -> np.ndarray:
    """Full n x m matrix of distances between query rows and reference rows.

    Refuses outputs larger than ``max_entries``; use the chunked brute-force
    search for those.
    """
    if Q.d != R.d:
        raise DimensionMismatchError(Q.d, R.d)
    metric.check_dim(Q.d)
    if Q.n * R.n > max_entries:
        raise MemoryBudgetError(
            f"distance matrix of {Q.n}x{R.n} entries exceeds budget of {max_entries}; "
            "use bf_knn, which processes queries in chunks"
        )
    out = reduced_block(metric.prepare(Q.data), metric.prepare(R.data), metric.kind)
    return metric.finalize(out)


@dataclass(frozen=True, eq=False)
class NeighborTable:
    """k nearest neighbors per query, ascending by distance then by index.

    ``indices`` and ``distances`` are n x k arrays; ``distances`` holds the
    reported (not reduced) values.
    """

    indices: np.ndarray
    distances: np.ndarray
    dist_evals: int = 0

    def __post_init__(self):
        if self.indices.shape != self.distances.shape or self.indices.ndim != 2:
            raise KnnError("indices and distances must be matching n x k arrays")
        self.indices.setflags(write=False)
        self.distances.setflags(write=False)

    @property
    def k(self) -> int:
        return self.indices.shape[1]

    @property
    def n(self) -> int:
        return self.indices.shape[0]

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> list[tuple[int, float]]:
        return [(int(j), float(v)) for j, v in zip(self.indices[i], self.distances[i])]

    def same_neighbors(self, other: "NeighborTable") -> bool:
        """Bitwise equality of indices and distances (counters ignored)."""
        return (
            self.indices.shape == other.indices.shape
            and bool(np.array_equal(self.indices, other.indices))
            and bool(
                np.array_equal(self.distances.view(np.uint64), other.distances.view(np.uint64))
            )
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, NeighborTable):
            return NotImplemented
        return self.same_neighbors(other)

    __hash__ = None
