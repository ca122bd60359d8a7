import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from corrlogdet.corrmat import logdet_perpendiculars
from corrlogdet.heavytail import GaussianLaw, TailLaw, standardize
from corrlogdet.normalization import norm_ppf
from corrlogdet.simharness import (
    SimConfig,
    export_results,
    gaussian_beta_oracle,
    independence_test,
    kolmogorov_sf,
    ks_statistic,
    ks_two_sample,
    load_results,
    qq_pairs,
    replacement_experiment,
    run_clt_experiment,
    simulate_logdets,
)


class TestKS:
    def test_stair_midpoints(self):
        N = 400
        x = norm_ppf((np.arange(1, N + 1) - 0.5) / N)
        assert ks_statistic(x).D == pytest.approx(0.5 / N, rel=1e-9)

    def test_point_mass(self):
        assert ks_statistic(np.zeros(50)).D == pytest.approx(0.5)

    def test_too_few(self):
        with pytest.raises(ValueError):
            ks_statistic([0.3])

    @given(st.lists(st.floats(-6, 6), min_size=2, max_size=60))
    def test_matches_scipy(self, xs):
        ours = ks_statistic(xs)
        ref = stats.kstest(xs, "norm", method="asymp")
        assert ours.D == pytest.approx(ref.statistic, abs=1e-12)
        assert 0.0 <= ours.pvalue <= 1.0

    @given(st.floats(0.05, 3.0))
    def test_kolmogorov_sf(self, x):
        assert kolmogorov_sf(x) == pytest.approx(stats.kstwobign.sf(x), abs=1e-10)

    def test_meta_trial(self):
        gen = np.random.default_rng(2024)
        hits = sum(ks_statistic(gen.standard_normal(1000)).D <= 0.043 for _ in range(400))
        assert hits >= 0.95 * 400

    def test_two_sample(self):
        assert ks_two_sample([0, 1, 2], [0, 1, 2]).D == 0.0
        assert ks_two_sample([0, 1], [5, 6]).D == 1.0
        a, b = np.random.default_rng(0).standard_normal((2, 300))
        assert ks_two_sample(a, b).D == pytest.approx(stats.ks_2samp(a, b).statistic, abs=1e-12)


class TestBetaOracle:
    def test_p1_zero(self):
        assert np.all(gaussian_beta_oracle(1, 30, 100, 0) == 0.0)

    def test_marginal_means(self):
        p, n, reps = 20, 60, 20000
        _, deltas = gaussian_beta_oracle(p, n, reps, 3, return_deltas=True)
        i = np.arange(p)
        m = deltas.mean(axis=0)
        se = deltas.std(axis=0, ddof=1) / math.sqrt(reps)
        assert np.all(np.abs(m - (n - i) / n) <= 4 * se + 1e-15)

    def test_matches_matrix_route(self):
        a = gaussian_beta_oracle(20, 60, 3000, 1)
        b, _ = simulate_logdets(GaussianLaw(), 20, 60, 3000, 1)
        assert ks_two_sample(a, b).D <= 0.05


class TestCLTExperiment:
    def test_single_rep(self):
        res = run_clt_experiment(SimConfig(10, 30, reps=1, seed=4))
        assert res.z.shape == (1,)
        assert 0.5 <= res.ks <= 1.0 and math.isnan(res.ks_pvalue)

    def test_logdet_matches_direct(self):
        from corrlogdet import _rng

        res = run_clt_experiment(SimConfig(8, 20, reps=3, seed=11))
        X = GaussianLaw().matrix(_rng.stream(11, 2), (8, 20))
        assert res.logdet[2] == logdet_perpendiculars(X).logdet

    def test_worker_reproducible(self):
        law = standardize(TailLaw.pareto(3.5))
        a = run_clt_experiment(SimConfig(30, 80, law=law, reps=40, seed=5))
        b = run_clt_experiment(SimConfig(30, 80, law=law, reps=40, seed=5, workers=3))
        assert np.array_equal(a.z, b.z)

    def test_prefix_property(self):
        a = run_clt_experiment(SimConfig(12, 40, reps=25, seed=8))
        b = run_clt_experiment(SimConfig(12, 40, reps=10, seed=8))
        assert np.array_equal(a.z[:10], b.z)

    def test_methods_agree(self):
        a = run_clt_experiment(SimConfig(25, 60, reps=20, seed=2))
        b = run_clt_experiment(SimConfig(25, 60, reps=20, seed=2, method="cholesky"))
        np.testing.assert_allclose(a.logdet, b.logdet, rtol=1e-9)

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            SimConfig(50, 40)
        with pytest.raises(ValueError):
            SimConfig(5, 40, reps=0)
        with pytest.raises(ValueError):
            SimConfig(5, 40, method="lu")

    def test_result_fields(self):
        res = run_clt_experiment(SimConfig(20, 50, reps=60, seed=1))
        d = res.to_dict()
        assert set(d) >= {"config", "consts", "ks", "moments", "z_quantiles"}
        assert 0.0 <= res.ks <= 1.0 and np.all(np.isfinite(res.z))
        assert d["config"]["law"] == {"gaussian": True}


class TestExport:
    @pytest.fixture
    def result(self):
        return run_clt_experiment(SimConfig(15, 45, reps=37, seed=3))

    def test_json_round_trip(self, result, tmp_path):
        path = tmp_path / "r.json"
        export_results(result, path)
        assert np.array_equal(load_results(path), result.z)
        doc = json.loads(path.read_text())
        assert doc["config"]["seed"] == 3 and "mu" in doc["consts"]

    def test_csv(self, result, tmp_path):
        path = tmp_path / "r.csv"
        export_results(result, path, format="csv")
        assert len(path.read_text().splitlines()) == 37 + 1
        assert np.array_equal(load_results(path), result.z)

    def test_qq(self, result, tmp_path):
        qq = export_results(result, tmp_path / "r.json")
        rows = [line.split(",") for line in open(qq).read().splitlines()[1:]]
        N = 37
        assert float(rows[0][0]) == pytest.approx(stats.norm.ppf(0.5 / N), rel=1e-12)
        assert float(rows[-1][0]) == pytest.approx(stats.norm.ppf((N - 0.5) / N), rel=1e-12)
        assert np.array_equal(qq_pairs(result.z)[:, 1], np.sort(result.z))

    def test_bad_path(self, result, tmp_path):
        with pytest.raises(OSError, match="nope"):
            export_results(result, tmp_path / "nope" / "r.json")

    def test_bad_format(self, result, tmp_path):
        with pytest.raises(ValueError):
            export_results(result, tmp_path / "r.xml", format="xml")


class TestReplacement:
    def test_shares_rows_and_s1(self):
        law = standardize(TailLaw.pareto(3.5))
        res = replacement_experiment(SimConfig(120, 300, law=law, reps=5, seed=1))
        assert res.s1 == 1 and len(res.pairs) == 5
        assert np.all(res.scaled_diffs >= 0)

    def test_empty_block_warns(self):
        with pytest.warns(RuntimeWarning, match="replacement block empty"):
            res = replacement_experiment(SimConfig(50, 100, reps=5))
        assert res.skipped and res.pairs == []

    def test_same_law(self):
        res = replacement_experiment(SimConfig(100, 200, reps=600, seed=2), s1_override=20)
        a = [pr.logdet_R for pr in res.pairs]
        b = [pr.logdet_R_check for pr in res.pairs]
        assert ks_two_sample(a, b).D <= 0.08

    def test_full_replacement(self):
        law = standardize(TailLaw.pareto(3.5))
        res = replacement_experiment(SimConfig(40, 100, law=law, reps=800, seed=6), s1_override=40)
        pure, _ = simulate_logdets(GaussianLaw(), 40, 100, 800, 99)
        assert ks_two_sample([pr.logdet_R_check for pr in res.pairs], pure).D <= 0.07

    def test_s1_too_big(self):
        with pytest.raises(ValueError):
            replacement_experiment(SimConfig(10, 20, reps=2), s1_override=11)


class TestIndependence:
    def test_null(self):
        X = np.random.default_rng(0).standard_normal((40, 200))
        res = independence_test(X, normalization="gaussian_exact")
        assert 0.0 <= res.pvalue <= 1.0
        assert res.reject == (res.pvalue < 0.05)

    def test_center_pvalue_one(self, monkeypatch):
        import corrlogdet.simharness as sh

        monkeypatch.setattr(sh, "standardize_logdet", lambda ld, c: 0.0)
        res = independence_test(np.random.default_rng(1).standard_normal((20, 40)))
        assert res.pvalue == 1.0 and not res.reject

    def test_power(self):
        from corrlogdet.simharness import equicorrelated_gaussian

        gen = np.random.default_rng(3)
        rej = [independence_test(equicorrelated_gaussian(100, 250, 0.1, gen)).reject for _ in range(20)]
        assert all(rej)

    def test_errors(self):
        X = np.random.default_rng(1).standard_normal((30, 20))
        with pytest.raises(ValueError):
            independence_test(X)
        with pytest.raises(ValueError):
            independence_test(X.T, level=1.5)
        with pytest.raises(ValueError):
            independence_test(X.T, normalization="bogus")


@pytest.fixture(scope="module")
def replacement_medians():
    law = standardize(TailLaw.pareto(3.5))
    return [
        float(np.median(replacement_experiment(SimConfig(p, n, law=law, reps=500, seed=7)).scaled_diffs))
        for p, n in ((240, 600), (400, 1000), (640, 1600))
    ]


@pytest.mark.slow
def test_replacement_effect_small(replacement_medians):
    # replacing s1 = p/100 rows moves log det by a small fraction of sigma_n
    assert all(0.0 < m < 0.25 for m in replacement_medians)


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="at p/n = 0.4 and n <= 1600 the median stays near 0.13-0.16; "
                   "s1 grows with p, so no decrease is visible at this scale")
def test_replacement_median_decreasing(replacement_medians):
    a, b, c = replacement_medians
    assert a > b > c
