import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isodepth.casestudy import construct_case
from isodepth.core import Dataset, SortedSample1D, sort_and_validate
from isodepth.errors import DimensionMismatch, DuplicateValue, InvalidParams
from isodepth.harness import (
    ExperimentConfig,
    concentration_check,
    convergence_experiment,
    depth_profile_experiment,
    derive_seed,
    estimate_depth_multidim,
    generate_sample,
    uniform_gap_statistics,
)
from isodepth.oracle import expected_depth_any
from strategies import samples


class TestConfig:
    def test_defaults(self):
        c = ExperimentConfig()
        assert (c.n, c.psi, c.repeats, c.M_grid[0], c.M_grid[-1]) == (100, 100, 10, 100, 1000)

    @pytest.mark.parametrize("bad", [
        {"M_grid": ()}, {"M_grid": (10, 5)}, {"M_grid": (5, 5)}, {"repeats": 0},
        {"generator": "cauchy"}, {"generator": "csv"}, {"n": 1},
    ])
    def test_invalid(self, bad):
        with pytest.raises(InvalidParams):
            ExperimentConfig(**bad)

    def test_from_dict_rejects_unknown(self):
        with pytest.raises(InvalidParams):
            ExperimentConfig.from_dict({"trees": 4})

    def test_round_trip(self):
        c = ExperimentConfig(generator="normal", n=30, psi=10, M_grid=(5, 10), repeats=2, seed=9)
        assert ExperimentConfig.from_dict(c.to_dict()) == c

    @pytest.mark.parametrize("gen", ["normal", "uniform", "exponential"])
    def test_generators(self, gen):
        s = generate_sample(ExperimentConfig(generator=gen, n=50, seed=1))
        assert s.n == 50
        if gen != "normal":
            assert s.values[0] >= 0
        assert s == generate_sample(ExperimentConfig(generator=gen, n=50, seed=1))

    def test_csv_generator(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("v\n3\n1\n2\n")
        s = generate_sample(ExperimentConfig(generator="csv", path=str(p), column="v"))
        assert s.values.tolist() == [1.0, 2.0, 3.0]

    def test_derive_seed(self):
        assert derive_seed(1, 2) == derive_seed(1, 2) != derive_seed(1, 3)


class TestConvergence:
    def test_trend_small(self):
        r = convergence_experiment(ExperimentConfig(n=30, psi=30, M_grid=(10, 300), repeats=4, seed=3))
        c = r.mean_curve()
        assert c[1] < c[0]

    def test_single_tree(self):
        r = convergence_experiment(ExperimentConfig(n=20, psi=20, M_grid=(1,), repeats=1))
        assert len(r.records) == 1 and math.isfinite(r.records[0][2]) and r.records[0][2] >= 0

    def test_three_points(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x\n0\n1\n2\n")
        cfg = ExperimentConfig(generator="csv", path=str(p), column="x", psi=3, M_grid=(100_000,), repeats=1)
        assert convergence_experiment(cfg).records[0][2] < 1e-3

    def test_subsampled_target(self):
        r = convergence_experiment(ExperimentConfig(n=60, psi=16, M_grid=(50, 2000), repeats=2, seed=5))
        c = r.mean_curve()
        assert c[1] < c[0] and c[1] < 0.05

    def test_prefix_equals_separate_fits(self):
        a = convergence_experiment(ExperimentConfig(n=25, psi=25, M_grid=(20, 40), repeats=2, seed=8))
        b = convergence_experiment(ExperimentConfig(n=25, psi=25, M_grid=(20,), repeats=2, seed=8))
        assert a.mse_table()[0].tolist() == b.mse_table()[0].tolist()

    def test_outputs(self):
        r = convergence_experiment(ExperimentConfig(n=10, psi=10, M_grid=(5, 10), repeats=3, seed=2))
        lines = r.to_csv().splitlines()
        assert lines[0] == "M,repeat,mse" and len(lines) == 7
        doc = json.loads(r.to_json())
        assert doc["config"]["seed"] == 2 and len(doc["summary"]) == 2
        for row in doc["summary"]:
            assert row["lo95"] <= row["mean_mse"] <= row["hi95"]
        assert np.all(r.mse_table() >= 0)

    def test_thread_count_irrelevant(self):
        cfg = ExperimentConfig(n=40, psi=40, M_grid=(10, 50), repeats=2, seed=4)
        assert convergence_experiment(cfg, 1).to_csv() == convergence_experiment(cfg, 3).to_csv()


class TestConcentration:
    s = sort_and_validate(np.arange(10.0) ** 1.3)

    def test_ranges(self):
        r = concentration_check(self.s, 0.1, 20, 10, seed=1)
        assert 0 <= r.empirical_freq <= 1 and r.hoeffding_bound > 0

    def test_impossible_deviation(self):
        assert concentration_check(self.s, 10.0, 50, 50, seed=2).empirical_freq == 0.0

    def test_below_bound(self):
        r = concentration_check(self.s, 0.5, 2000, 500, seed=3)
        assert r.hoeffding_bound == pytest.approx(2 * math.exp(-10))
        assert r.empirical_freq <= r.hoeffding_bound

    def test_index(self):
        r = concentration_check(self.s, 0.5, 100, 5, seed=4, index=5)
        assert r.index == 5 and r.oracle_depth == pytest.approx(expected_depth_any(self.s, self.s[4]))

    def test_bad_epsilon(self):
        with pytest.raises(InvalidParams):
            concentration_check(self.s, 0.0, 10, 10, seed=0)


class TestGapStatistics:
    def test_mean_min_gap(self):
        for n in (20, 100):
            g = uniform_gap_statistics(n, 10_000, seed=42)
            assert abs(g.mean_min_gap / g.expected - 1) < 0.10
            assert g.expected == 1 / (n * n - 1)

    def test_tiny(self):
        g = uniform_gap_statistics(4, 1, seed=0)
        assert math.isfinite(g.mean_min_gap) and all(v >= 1 for v in g.kappa_quantiles.values())

    def test_json_and_determinism(self):
        a = uniform_gap_statistics(30, 200, seed=5).to_json()
        assert a == uniform_gap_statistics(30, 200, seed=5).to_json()
        assert json.loads(a)["n"] == 30

    def test_small_n_rejected(self):
        with pytest.raises(InvalidParams):
            uniform_gap_statistics(3, 10, seed=0)


class TestMultidim:
    def test_identical_columns(self):
        x = np.array([0.0, 1.0, 3.0, 7.0, 8.0])
        X = np.column_stack([x, x])
        for q in (2.0, 7.5, -1.0):
            assert estimate_depth_multidim(X, [q, q]) == pytest.approx(
                expected_depth_any(SortedSample1D(x), q), abs=1e-15)

    def test_mapped_identity(self):
        x = np.array([0.0, 1.0, 3.0])
        got = estimate_depth_multidim(x[:, None], [2.0], mode="mapped", mapping="projection")
        assert got == expected_depth_any(SortedSample1D(x), 2.0)

    def test_corner_point_shallowest(self):
        g = np.arange(6.0)
        grid = np.array([(a, b) for a in g for b in g])
        X = np.vstack([grid, [[15.0, 15.0]]])
        ds = Dataset(X + np.random.default_rng(0).uniform(-1e-3, 1e-3, X.shape))
        depths = [estimate_depth_multidim(ds, row) for row in ds.rows]
        assert int(np.argmin(depths)) == len(X) - 1

    def test_rbf_and_l1(self):
        # an isolated outlier stays shallowest under both scalar mappings
        X = np.vstack([np.random.default_rng(1).normal(size=(30, 2)), [[6.0, 6.0]]])
        for mapping, params in (("rbf", {"gamma": 0.1}), ("l1_centroid", {})):
            d = [estimate_depth_multidim(X, row, mode="mapped", mapping=mapping, params=params) for row in X]
            assert int(np.argmin(d)) == len(X) - 1

    def test_ring_centre_needs_mapping(self):
        t = np.linspace(0, 2 * np.pi, 40, endpoint=False) + 0.01 * np.random.default_rng(0).random(40)
        X = np.vstack([5 * np.column_stack([np.cos(t), np.sin(t)]), [[0.01, -0.02]]])
        proj = [estimate_depth_multidim(X, r) for r in X]
        rbf = [estimate_depth_multidim(X, r, mode="mapped", mapping="rbf", params={"gamma": 0.5}) for r in X]
        assert int(np.argmin(proj)) != len(X) - 1
        assert int(np.argmin(rbf)) == len(X) - 1

    def test_errors(self):
        X = np.random.default_rng(2).random((10, 2))
        with pytest.raises(DimensionMismatch):
            estimate_depth_multidim(X, [0.0])
        with pytest.raises(InvalidParams):
            estimate_depth_multidim(X[:, :1], [0.0])
        with pytest.raises(InvalidParams):
            estimate_depth_multidim(X, [0.0, 0.0], mode="mapped", mapping="cosine")
        with pytest.raises(DuplicateValue):
            estimate_depth_multidim(np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]]), [0.0, 0.0],
                                    mode="mapped", mapping="l1_centroid", params={"centroid": [1.0, 1.0]})

    @given(samples(min_n=3, max_n=15), samples(min_n=3, max_n=15), st.floats(0.1, 10), st.floats(-20, 20))
    @settings(max_examples=40)
    def test_affine_invariance(self, a, b, scale, shift):
        n = min(a.n, b.n)
        X = np.column_stack([a.values[:n], b.values[:n][::-1]])
        q = X.mean(axis=0)
        Y = X * np.array([scale, 1.0]) + np.array([shift, -shift])
        qy = q * np.array([scale, 1.0]) + np.array([shift, -shift])
        assert estimate_depth_multidim(Y, qy) == pytest.approx(estimate_depth_multidim(X, q), abs=1e-9)


class TestDepthTable:
    def test_twenty_uniform(self):
        s = sort_and_validate(np.random.default_rng(0).random(20))
        t = depth_profile_experiment(s, 3)
        assert len(t.rows) == 20 and sum(r.anomaly for r in t.rows) == 3
        assert t.trees == 1000
        assert max(abs(r.oracle_depth - r.forest_depth) for r in t.rows) < 0.3

    def test_two_points(self):
        t = depth_profile_experiment(sort_and_validate([0.0, 1.0]), 1)
        assert [r.oracle_depth for r in t.rows] == [1.0, 1.0]
        assert [r.forest_depth for r in t.rows] == [1.0, 1.0]
        assert [r.anomaly for r in t.rows] == [True, False]

    def test_marginal_case_flagged(self):
        case = construct_case("marginal_single", n=15, anomaly_gap=3.0, kappa=1.5)
        assert 1 in depth_profile_experiment(case.sample, 1).flagged

    def test_csv(self):
        t = depth_profile_experiment(sort_and_validate([0.0, 1.0, 2.0]), 1, trees=10, seed=1)
        assert t.to_csv().splitlines()[0] == "index,x,oracle_depth,forest_depth,anomaly"
