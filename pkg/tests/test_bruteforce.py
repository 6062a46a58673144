import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exactknn.bruteforce import (
    BfConfig,
    bf_cost_model,
    bf_knn,
    select_k_smallest,
    select_k_smallest_rows,
)
from exactknn.core import DimensionMismatchError, KnnError, Metric, PointSet, pairwise_distances

from _oracles import naive_knn, random_spd, sort_oracle


class TestSelectKSmallest:
    def test_smallest_two(self):
        idx, vals = select_k_smallest([5, 1, 4, 2], 2)
        assert list(zip(idx.tolist(), vals.tolist())) == [(1, 1.0), (3, 2.0)]

    def test_tie_takes_lower_index(self):
        idx, vals = select_k_smallest([3, 1, 1], 1)
        assert idx.tolist() == [1] and vals.tolist() == [1.0]

    def test_random_vs_full_sort(self):
        row = np.random.default_rng(5).standard_normal(1000)
        idx, vals = select_k_smallest(row, 20)
        exp_idx, exp_vals = sort_oracle(row, 20)
        assert idx.tolist() == exp_idx
        assert vals.tolist() == exp_vals

    def test_heavy_ties(self):
        row = np.random.default_rng(1).integers(0, 4, 300).astype(float)
        for k in (1, 5, 75, 150, 300):
            idx, vals = select_k_smallest(row, k)
            assert (idx.tolist(), vals.tolist()) == sort_oracle(row, k)

    @pytest.mark.parametrize("k", [0, 5])
    def test_bad_k(self, k):
        with pytest.raises(KnnError, match="k="):
            select_k_smallest([1.0, 2.0, 3.0, 4.0], k)

    def test_k_above_m_states_both(self):
        with pytest.raises(KnnError, match=r"k=5.*m=4"):
            select_k_smallest([1.0, 2.0, 3.0, 4.0], 5)

    def test_non_finite(self):
        with pytest.raises(KnnError):
            select_k_smallest([1.0, np.nan], 1)

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.integers(-5, 5), min_size=1, max_size=40).map(lambda v: np.array(v, float)),
        st.data(),
    )
    def test_rows_match_oracle(self, row, data):
        k = data.draw(st.integers(1, row.shape[0]))
        block = np.vstack([row, row[::-1], np.roll(row, 3)])
        idx, vals = select_k_smallest_rows(block, k)
        for r in range(3):
            assert (idx[r].tolist(), vals[r].tolist()) == sort_oracle(block[r], k)


class TestBfKnn:
    def test_collinear(self):
        R = PointSet([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        t = bf_knn(PointSet([[0.1, 0.0]]), R, 2)
        assert t.indices.tolist() == [[0, 1]]
        np.testing.assert_allclose(t.distances, [[0.1, 0.9]], rtol=0, atol=1e-15)

    def test_k_equals_m_full_sort(self):
        rng = np.random.default_rng(8)
        R = PointSet(rng.random((30, 3)))
        Q = PointSet(rng.random((4, 3)))
        t = bf_knn(Q, R, 30)
        exp_idx, exp_dist = naive_knn(Q.data, R.data, 30)
        assert t.indices.tolist() == exp_idx
        assert t.distances.tolist() == exp_dist

    @pytest.mark.parametrize("kind", ["euclidean", "manhattan", "chebyshev", "mahalanobis"])
    def test_matches_naive_oracle(self, kind):
        rng = np.random.default_rng(21)
        Q, R = rng.random((50, 8)), rng.random((50, 8))
        mat = random_spd(rng, 8) if kind == "mahalanobis" else None
        metric = Metric(kind, mat)
        t = bf_knn(PointSet(Q), PointSet(R), 20, metric)
        exp_idx, exp_dist = naive_knn(Q, R, 20, kind, mat)
        assert t.indices.tolist() == exp_idx
        assert t.distances.tolist() == exp_dist

    def test_duplicate_references_order_by_index(self):
        R = PointSet([[1.0], [0.0], [1.0], [0.0], [1.0]])
        t = bf_knn(PointSet([[0.0]]), R, 4)
        assert t.indices.tolist() == [[1, 3, 0, 2]]

    def test_evaluation_count_is_nm(self):
        rng = np.random.default_rng(4)
        Q, R = PointSet(rng.random((37, 3))), PointSet(rng.random((53, 3)))
        for k in (1, 10, 53):
            assert bf_knn(Q, R, k, config=BfConfig(chunk_size=5)).dist_evals == 37 * 53

    def test_counter_off(self):
        P = PointSet(np.eye(3))
        assert bf_knn(P, P, 1, config=BfConfig(count_distance_evals=False)).dist_evals == 0

    @pytest.mark.parametrize("workers", [1, 2, 8])
    @pytest.mark.parametrize("chunk", [1, 7, 64])
    def test_independent_of_chunking_and_workers(self, workers, chunk):
        rng = np.random.default_rng(9)
        Q, R = PointSet(rng.random((64, 6))), PointSet(rng.random((90, 6)))
        baseline = bf_knn(Q, R, 9, config=BfConfig(chunk_size=64, worker_count=1))
        assert bf_knn(Q, R, 9, config=BfConfig(chunk_size=chunk, worker_count=workers)) == baseline

    def test_composes_from_pairwise(self):
        rng = np.random.default_rng(10)
        Q, R = PointSet(rng.random((25, 4))), PointSet(rng.random((40, 4)))
        for metric in (Metric.euclidean(), Metric.manhattan(), Metric.chebyshev()):
            full = pairwise_distances(Q, R, metric)
            t = bf_knn(Q, R, 7, metric)
            for i in range(Q.n):
                idx, vals = select_k_smallest(full[i], 7)
                assert idx.tolist() == t.indices[i].tolist()
                assert vals.tolist() == t.distances[i].tolist()

    def test_errors(self):
        R = PointSet(np.zeros((3, 2)))
        with pytest.raises(KnnError, match="k=4"):
            bf_knn(R, R, 4)
        with pytest.raises(DimensionMismatchError):
            bf_knn(PointSet(np.zeros((1, 3))), R, 1)

    def test_bad_config(self):
        with pytest.raises(KnnError):
            BfConfig(chunk_size=0)


class TestCostModel:
    def test_unit(self):
        c = bf_cost_model(1, 1, 1, 1)
        assert (c.additions, c.multiplications, c.comparisons) == (2, 1, 0.0)

    def test_product(self):
        assert bf_cost_model(10, 100, 8, 1).multiplications == 8000

    def test_linear_in_d(self):
        a, b = bf_cost_model(7, 64, 5, 3), bf_cost_model(7, 64, 10, 3)
        assert b.additions == 2 * a.additions
        assert b.multiplications == 2 * a.multiplications
        assert b.comparisons == a.comparisons == 7 * 64 * 6

    def test_independent_of_k(self):
        assert bf_cost_model(5, 9, 2, 1) == bf_cost_model(5, 9, 2, 9)

    def test_precondition(self):
        with pytest.raises(KnnError):
            bf_cost_model(0, 1, 1, 1)
