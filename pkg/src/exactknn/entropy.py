"""k-nearest-neighbor estimate of differential entropy (nats).

    H(Y) ~ mean_i [ log(n - 1) + d * log(rho_k(y_i)) + log(c1(d)) - psi(k) ]

with rho_k(y_i) the Euclidean distance from y_i to its k-th nearest other
sample, c1(d) the volume of the Euclidean unit ball and psi the digamma
function.  The ``literal`` variant drops the factor d on log(rho_k); the two
agree for one-dimensional data and only ``corrected`` is consistent for
d > 1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bruteforce import BfConfig, bf_knn
from .core import KnnError, Metric, PointSet


class Variant(str, enum.Enum):
    CORRECTED = "corrected"
    LITERAL = "literal"


class DuplicatePolicy(str, enum.Enum):
    ERROR = "error"
    JITTER = "jitter"


class DuplicatePointsError(KnnError):
    def __init__(self, indices):
        self.indices = [int(i) for i in indices]
        shown = ", ".join(map(str, self.indices[:20]))
        more = "" if len(self.indices) <= 20 else f", ... ({len(self.indices)} total)"
        super().__init__(f"zero k-th neighbor distance at indices [{shown}{more}]")


_ASYMPTOTIC_FROM = 10.0


def digamma(x: float) -> float:
    """Logarithmic derivative of the gamma function for x > 0.

    Shifts x upward with psi(x) = psi(x + 1) - 1/x until x >= 10, then uses
    ln x - 1/(2x) - 1/(12x^2) + 1/(120x^4) - 1/(252x^6) + 1/(240x^8).  The
    first omitted term is 1/(132 x^10) < 1e-12 there.
    """
    x = float(x)
    if not x > 0 or not math.isfinite(x):
        raise KnnError(f"digamma is only defined here for finite x > 0, got {x}")
    shift = 0.0
    while x < _ASYMPTOTIC_FROM:
        shift += 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 / 240)))
    return math.log(x) - 0.5 / x - series - shift


def log_unit_ball_volume(d: int) -> float:
    if d < 1 or int(d) != d:
        raise KnnError(f"dimension must be a positive integer, got {d}")
    return math.log(2.0) + 0.5 * d * math.log(math.pi) - math.log(d) - math.lgamma(0.5 * d)


def unit_ball_volume(d: int) -> float:
    """Volume of the Euclidean unit ball in R^d: 2 pi^(d/2) / (d Gamma(d/2))."""
    return math.exp(log_unit_ball_volume(d))


def _check_k(n: int, k: int) -> None:
    if k < 1:
        raise KnnError(f"k must be >= 1, got {k}")
    if k >= n:
        raise KnnError(f"need more than k={k} samples for a k-th neighbor, got n={n}")


def knn_distances(Y: PointSet, k: int, config: BfConfig = BfConfig()) -> np.ndarray:
    """rho_k for every sample, excluding each sample itself by index."""
    _check_k(Y.n, k)
    table = bf_knn(Y, Y, k + 1, Metric.euclidean(), config)
    own = table.indices == np.arange(Y.n)[:, None]
    # Self sits in the first k + 1 unless k + 1 duplicates outrank it by
    # index; then every remaining neighbor is at distance 0 anyway.
    has_self = own.any(axis=1)
    drop = np.where(has_self, np.argmax(own, axis=1), k)
    keep = np.ones(table.indices.shape, dtype=bool)
    keep[np.arange(Y.n), drop] = False
    return table.distances[keep].reshape(Y.n, k)[:, k - 1].copy()


def rho_k(Y: PointSet, i: int, k: int) -> float:
    """Distance from sample i to its k-th nearest other sample."""
    _check_k(Y.n, k)
    if not 0 <= i < Y.n:
        raise KnnError(f"index {i} out of range for {Y.n} samples")
    table = bf_knn(PointSet(Y.data[i : i + 1]), Y, k + 1, Metric.euclidean())
    others = [dist for j, dist in table[0] if j != i]
    return others[k - 1]


@dataclass(frozen=True, eq=False)
class EntropyEstimate:
    value_nats: float
    n: int
    k: int
    d: int
    variant: Variant
    per_point_terms: Optional[np.ndarray] = None

    def as_dict(self) -> dict:
        return {
            "value_nats": self.value_nats,
            "n": self.n,
            "k": self.k,
            "d": self.d,
            "variant": self.variant.value,
        }


def _jitter(Y: PointSet, seed: int) -> PointSet:
    spread = float(np.ptp(Y.data)) or 1.0
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-1.0, 1.0, size=Y.data.shape) * (1e-12 * spread)
    return PointSet(Y.data + noise)


def kl_entropy(
    Y: PointSet,
    k: int = 1,
    variant: Variant | str = Variant.CORRECTED,
    duplicates: DuplicatePolicy | str = DuplicatePolicy.ERROR,
    seed: int = 0,
    keep_terms: bool = False,
    config: BfConfig = BfConfig(),
) -> EntropyEstimate:
    """Nearest-neighbor entropy estimate of the samples in ``Y``, in nats.

    Coincident samples give rho_k = 0 and an undefined log.  With
    ``duplicates="error"`` the offending indices are reported; with
    ``"jitter"`` the data is perturbed by uniform noise of relative size
    1e-12 (seeded) before estimating.
    """
    variant = Variant(variant)
    duplicates = DuplicatePolicy(duplicates)
    _check_k(Y.n, k)
    rho = knn_distances(Y, k, config)
    if (rho == 0).any() and duplicates is DuplicatePolicy.JITTER:
        Y = _jitter(Y, seed)
        rho = knn_distances(Y, k, config)
    zero = np.flatnonzero(rho == 0)
    if zero.size:
        raise DuplicatePointsError(zero)

    n, d = Y.n, Y.d
    log_rho = np.log(rho)
    if variant is Variant.CORRECTED:
        log_rho = d * log_rho
    constant = math.log(n - 1) + log_unit_ball_volume(d) - digamma(k)
    terms = log_rho + constant
    return EntropyEstimate(
        value_nats=float(terms.mean()),
        n=n,
        k=k,
        d=d,
        variant=variant,
        per_point_terms=terms if keep_terms else None,
    )
