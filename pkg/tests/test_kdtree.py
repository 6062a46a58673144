import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exactknn.bruteforce import bf_knn
from exactknn.core import DimensionMismatchError, KnnError, Metric, PointSet
from exactknn.kdtree import build_kdtree, depth_bound, kdtree_knn, kdtree_stats

from _oracles import two_blobs

PRUNABLE = [Metric.euclidean(), Metric.manhattan(), Metric.chebyshev()]


def check_invariants(tree):
    data = tree.reference.data
    leaves = tree.leaves()
    seen = np.concatenate([tree.leaf_indices(leaf) for leaf in leaves])
    assert sorted(seen.tolist()) == list(range(tree.reference.n))
    for leaf in leaves:
        assert tree.stop[leaf] - tree.start[leaf] <= tree.leaf_size
    for node in range(tree.node_count):
        if tree.is_leaf(node):
            continue
        dim, value = tree.split_dim[node], tree.split_value[node]
        lpts = data[tree.leaf_indices(tree.left[node]), dim]
        rpts = data[tree.leaf_indices(tree.right[node]), dim]
        assert (lpts <= value).all() and (rpts >= value).all()


class TestBuild:
    def test_single_point(self):
        tree = build_kdtree(PointSet([[1.0, 2.0]]), leaf_size=16)
        assert tree.node_count == 1
        assert tree.leaf_indices(0).tolist() == [0]

    def test_partition(self):
        tree = build_kdtree(PointSet(np.random.default_rng(0).random((100, 3))), 16)
        sizes = [tree.stop[l] - tree.start[l] for l in tree.leaves()]
        assert sum(sizes) == 100 and max(sizes) <= 16
        check_invariants(tree)

    def test_identical_points(self):
        R = PointSet(np.ones((50, 4)))
        tree = build_kdtree(R, 4)
        check_invariants(tree)
        assert tree.depth <= depth_bound(50, 4) + 1
        Q = PointSet([[1.0] * 4, [0.0] * 4])
        assert kdtree_knn(tree, Q, 7) == bf_knn(Q, R, 7)

    def test_deterministic(self):
        R = PointSet(np.random.default_rng(1).integers(0, 5, (300, 3)).astype(float))
        assert build_kdtree(R, 8).same_structure(build_kdtree(R, 8))

    def test_errors(self):
        with pytest.raises(KnnError):
            build_kdtree(PointSet([[0.0]]), 0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 400), st.integers(1, 5), st.integers(1, 20), st.integers(0, 2**31))
    def test_invariants_and_depth(self, m, d, leaf, seed):
        rng = np.random.default_rng(seed)
        # coarse grid values force plenty of duplicates on split coordinates
        R = PointSet(rng.integers(0, 4, (m, d)).astype(float))
        tree = build_kdtree(R, leaf)
        check_invariants(tree)
        assert tree.depth <= depth_bound(m, leaf) + 1


class TestStats:
    def test_single_point(self):
        s = kdtree_stats(build_kdtree(PointSet([[0.0]])))
        assert (s.node_count, s.depth, s.mean_leaf_occupancy) == (1, 0, 1.0)

    def test_depth_bound_100_16(self):
        s = kdtree_stats(build_kdtree(PointSet(np.random.default_rng(3).random((100, 2))), 16))
        assert depth_bound(100, 16) == 3
        assert s.depth <= 4

    def test_occupancy_times_leaves(self):
        s = kdtree_stats(build_kdtree(PointSet(np.random.default_rng(3).random((777, 5))), 10))
        assert s.mean_leaf_occupancy * s.leaf_count == pytest.approx(777, abs=1e-9)
        assert s.node_count == 2 * s.leaf_count - 1


class TestSearch:
    def test_collinear(self):
        tree = build_kdtree(PointSet([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]))
        t = kdtree_knn(tree, PointSet([[0.1, 0.0]]), 2)
        assert t.indices.tolist() == [[0, 1]]
        np.testing.assert_allclose(t.distances, [[0.1, 0.9]], atol=1e-15)

    @pytest.mark.parametrize("metric", PRUNABLE, ids=str)
    def test_random_matches_bf(self, metric):
        rng = np.random.default_rng(17)
        R, Q = PointSet(rng.random((500, 8))), PointSet(rng.random((100, 8)))
        assert kdtree_knn(build_kdtree(R), Q, 20, metric) == bf_knn(Q, R, 20, metric)

    @pytest.mark.parametrize("metric", PRUNABLE, ids=str)
    def test_ties_match_bf(self, metric):
        rng = np.random.default_rng(2)
        R = PointSet(rng.integers(0, 3, (400, 3)).astype(float))
        Q = PointSet(rng.integers(0, 3, (60, 3)).astype(float))
        for k in (1, 13, 50):
            assert kdtree_knn(build_kdtree(R, 5), Q, k, metric) == bf_knn(Q, R, k, metric)

    def test_clustered_prunes(self):
        rng = np.random.default_rng(5)
        R, Q = PointSet(two_blobs(rng, 2000, 8)), PointSet(two_blobs(rng, 400, 8))
        t = kdtree_knn(build_kdtree(R), Q, 20)
        assert t == bf_knn(Q, R, 20)
        assert t.dist_evals < 0.5 * Q.n * R.n

    def test_evals_never_exceed_nm_and_grow_with_k(self):
        rng = np.random.default_rng(6)
        R, Q = PointSet(rng.random((600, 4))), PointSet(rng.random((50, 4)))
        tree = build_kdtree(R)
        counts = [kdtree_knn(tree, Q, k).dist_evals for k in (1, 5, 20, 100, 600)]
        assert all(c <= Q.n * R.n for c in counts)
        assert counts[0] < Q.n * R.n
        assert counts == sorted(counts)

    def test_mahalanobis_rejected(self):
        tree = build_kdtree(PointSet(np.eye(2)))
        with pytest.raises(KnnError, match="bf_knn"):
            kdtree_knn(tree, PointSet(np.eye(2)), 1, Metric.mahalanobis(np.eye(2)))

    def test_errors(self):
        tree = build_kdtree(PointSet(np.eye(3)))
        with pytest.raises(KnnError, match="k=4"):
            kdtree_knn(tree, PointSet(np.eye(3)), 4)
        with pytest.raises(DimensionMismatchError):
            kdtree_knn(tree, PointSet(np.eye(2)), 1)

    @settings(max_examples=25, deadline=None)
    @given(
        st.integers(1, 300), st.integers(1, 30), st.integers(1, 12),
        st.integers(1, 20), st.sampled_from(PRUNABLE), st.integers(0, 2**31),
    )
    def test_exact_property(self, m, n, d, leaf, metric, seed):
        rng = np.random.default_rng(seed)
        R, Q = PointSet(rng.standard_normal((m, d))), PointSet(rng.standard_normal((n, d)))
        k = int(rng.integers(1, m + 1))
        assert kdtree_knn(build_kdtree(R, leaf), Q, k, metric) == bf_knn(Q, R, k, metric)
