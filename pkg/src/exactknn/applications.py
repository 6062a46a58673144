"""kNN majority-vote classification and descriptor-voting image retrieval."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bruteforce import BfConfig, bf_knn
from .core import DimensionMismatchError, KnnError, Metric, PointSet


@dataclass(frozen=True, eq=False)
class LabeledSet:
    points: PointSet
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.shape != (self.points.n,):
            raise KnnError(
                f"expected {self.points.n} labels, got shape {labels.shape}"
            )
        object.__setattr__(self, "labels", labels)


def _vote(labels: np.ndarray, dists: np.ndarray) -> int:
    # (votes desc, summed distance asc, label asc)
    classes, inverse, votes = np.unique(labels, return_inverse=True, return_counts=True)
    summed = np.zeros(classes.shape[0])
    for pos in range(labels.shape[0]):
        summed[inverse[pos]] += dists[pos]
    best = np.lexsort((classes, summed, -votes))[0]
    return int(classes[best])


def knn_classify(
    train: LabeledSet,
    Q: PointSet,
    k: int,
    metric: Metric = Metric(),
    config: BfConfig = BfConfig(),
) -> np.ndarray:
    """Majority label among each query's k nearest training points.

    Vote ties go to the class whose tied members have the smaller summed
    distance, then to the smaller label.
    """
    table = bf_knn(Q, train.points, k, metric, config)
    neighbor_labels = train.labels[table.indices]
    return np.array(
        [_vote(neighbor_labels[i], table.distances[i]) for i in range(Q.n)], dtype=np.int64
    )


@dataclass(frozen=True, eq=False)
class DescriptorDatabase:
    descriptors: PointSet
    image_of: np.ndarray
    image_count: int

    def __post_init__(self):
        image_of = np.asarray(self.image_of, dtype=np.int64)
        if image_of.shape != (self.descriptors.n,):
            raise KnnError(
                f"expected {self.descriptors.n} image ids, got shape {image_of.shape}"
            )
        if image_of.min() < 0 or image_of.max() >= self.image_count:
            raise KnnError(f"image ids must lie in [0, {self.image_count})")
        missing = np.setdiff1d(np.arange(self.image_count), image_of)
        if missing.size:
            raise KnnError(f"images without descriptors: {missing.tolist()}")
        object.__setattr__(self, "image_of", image_of)

    @classmethod
    def from_ids(cls, descriptors: PointSet, image_of) -> "DescriptorDatabase":
        image_of = np.asarray(image_of, dtype=np.int64)
        return cls(descriptors, image_of, int(image_of.max()) + 1)


@dataclass(frozen=True, eq=False)
class VoteTally:
    scores: np.ndarray
    ranking: np.ndarray

    @property
    def best(self) -> int:
        return int(self.ranking[0])


def retrieve_vote(
    db: DescriptorDatabase,
    query_descriptors: PointSet,
    k: int,
    metric: Metric = Metric(),
    config: BfConfig = BfConfig(),
) -> VoteTally:
    """Each query descriptor's k nearest database descriptors vote for their image.

    Images are ranked by votes, ties by ascending image id.
    """
    if query_descriptors.n < 1:
        raise KnnError("query descriptor set is empty")
    if query_descriptors.d != db.descriptors.d:
        raise DimensionMismatchError(query_descriptors.d, db.descriptors.d, "query and database descriptors")
    table = bf_knn(query_descriptors, db.descriptors, k, metric, config)
    scores = np.bincount(db.image_of[table.indices].ravel(), minlength=db.image_count)
    ranking = np.lexsort((np.arange(db.image_count), -scores))
    return VoteTally(scores.astype(np.int64), ranking.astype(np.int64))
