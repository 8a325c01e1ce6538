import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isodepth.errors import DimensionMismatch, IndexOutOfBounds, InvalidParams, KTooLarge
from isodepth.knn import KnnConfig, knn_score, knn_scores, rank_by_knn
from strategies import samples


class TestScore:
    data = np.array([0.0, 1.0, 2.0, 4.0])

    def test_excludes_self(self):
        assert knn_score(self.data, 4.0, KnnConfig(k=2)) == 2.5

    def test_nearest(self):
        assert knn_score(self.data, 0.0, KnnConfig(k=1)) == 1.0

    def test_self_toggle(self):
        d = np.array([0.0, 1.0])
        assert knn_score(d, 0.0, KnnConfig(1, exclude_self=True)) == 1.0
        assert knn_score(d, 0.0, KnnConfig(1, exclude_self=False)) == 0.0

    def test_off_sample_query(self):
        assert knn_score(self.data, 3.0, KnnConfig(k=2)) == 1.0

    def test_multidim_l1(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [3.0, 0.0]])
        assert knn_score(X, [0.0, 0.0], KnnConfig(1)) == 2.0

    def test_errors(self):
        with pytest.raises(InvalidParams):
            KnnConfig(k=0)
        with pytest.raises(KTooLarge):
            knn_score(self.data, 0.0, KnnConfig(k=4))
        with pytest.raises(KTooLarge):
            knn_scores(self.data, KnnConfig(k=4))
        with pytest.raises(DimensionMismatch):
            knn_score(self.data, [0.0, 1.0], KnnConfig(1))

    def test_batch_matches_single(self):
        X = np.random.default_rng(0).random((40, 3))
        cfg = KnnConfig(k=4)
        assert np.allclose(knn_scores(X, cfg), [knn_score(X, x, cfg) for x in X], rtol=0, atol=1e-15)


class TestRank:
    def test_far_point_first(self):
        assert rank_by_knn(np.array([0.0, 10, 11, 12]), KnnConfig(1), 1) == [1]

    def test_equal_spacing_boundaries(self):
        assert sorted(rank_by_knn(np.arange(10.0), KnnConfig(3), 2)) == [1, 10]

    def test_tie_to_smaller_index(self):
        assert rank_by_knn(np.arange(5.0), KnnConfig(1), 2) == [1, 2]

    def test_small_cluster_not_top_for_small_k(self):
        # a tight five-point cluster far right of an equally spaced block;
        # with k below the cluster size every neighbour stays inside it
        X = np.concatenate([np.arange(20.0), 29 + 0.5 * np.arange(5.0)])
        top = rank_by_knn(X, KnnConfig(3), 5)
        assert not set(top) & set(range(21, 26))

    def test_bad_m(self):
        with pytest.raises(IndexOutOfBounds):
            rank_by_knn(np.arange(3.0), KnnConfig(1), 4)


class TestProperties:
    @given(samples(min_n=2, max_n=25), st.data())
    def test_positive(self, s, data):
        k = data.draw(st.integers(1, s.n - 1))
        assert np.all(knn_scores(s.values, KnnConfig(k)) > 0)

    @given(samples(min_n=3, max_n=25), st.floats(-100, 100), st.floats(0.1, 10), st.data())
    @settings(max_examples=60)
    def test_translation_and_scale(self, s, b, a, data):
        k = data.draw(st.integers(1, s.n - 1))
        cfg = KnnConfig(k)
        base = knn_scores(s.values, cfg)
        assert np.allclose(knn_scores(s.values + b, cfg), base, rtol=1e-9, atol=1e-9)
        assert np.allclose(knn_scores(a * s.values, cfg), a * base, rtol=1e-9, atol=0)
        # exact ties can break differently after rounding, so compare only untied prefixes
        r0 = rank_by_knn(s.values, cfg, 1)[0]
        srt = np.sort(base)[::-1]
        if srt.size < 2 or srt[0] - srt[1] > 1e-9 * srt[0]:
            assert rank_by_knn(a * s.values, cfg, 1)[0] == r0

    @given(samples(min_n=2, max_n=25))
    def test_all_neighbours_closed_form(self, s):
        x = s.values
        want = np.abs(x[:, None] - x[None, :]).sum(axis=1) / (s.n - 1)
        assert np.allclose(knn_scores(x, KnnConfig(s.n - 1)), want, rtol=1e-12, atol=0)
