"""Scenario parameters, data generation, contamination, and the bench harness."""

import json
import math

import numpy as np
import pytest

from cellshield.simulate import (
    BenchResult,
    ScenarioSpec,
    bench_replicates_csv,
    bench_summary_json,
    contaminate,
    generate,
    run_bench,
    scenario_params,
)


class TestScenarioSpec:
    def test_group_counts(self):
        assert ScenarioSpec(scenario=1, p=5).k == 10
        assert ScenarioSpec(scenario=2, p=50).k == 6

    def test_validation(self):
        with pytest.raises(ValueError, match="scenario"):
            ScenarioSpec(scenario=3, p=5)
        with pytest.raises(ValueError, match="p >= 2"):
            ScenarioSpec(scenario=1, p=1)
        with pytest.raises(ValueError, match="p >= 4"):
            ScenarioSpec(scenario=2, p=3)
        with pytest.raises(ValueError, match="epsilon"):
            ScenarioSpec(scenario=1, p=5, epsilon=1.0)
        with pytest.raises(ValueError, match="n_per_group"):
            ScenarioSpec(scenario=1, p=5, n_per_group=1)


class TestScenarioOneParams:
    def test_front_block_precision(self):
        params = scenario_params(1, 5)
        want = np.eye(5)
        want[0, 1] = want[1, 0] = 0.9
        for g in range(5):
            assert np.array_equal(params.precisions[g], want)

    def test_back_block_precision(self):
        params = scenario_params(1, 5)
        want = np.eye(5)
        want[3, 4] = want[4, 3] = 0.9
        for g in range(5, 10):
            assert np.array_equal(params.precisions[g], want)

    def test_mean_spikes(self):
        params = scenario_params(1, 5)
        assert np.array_equal(params.means[2], [0.0, 0.0, 3.0, 0.0, 0.0])
        assert np.array_equal(params.means[7], [0.0, 0.0, -3.0, 0.0, 0.0])
        assert np.array_equal(params.means[0], [3.0, 0.0, 0.0, 0.0, 0.0])
        assert np.array_equal(params.means[5], -params.means[0])

    def test_mean_positions_wrap_when_p_is_small(self):
        params = scenario_params(1, 3)
        assert np.array_equal(params.means[3], [3.0, 0.0, 0.0])

    def test_covariance_block_values(self):
        # inverse of [[1, .9], [.9, 1]] scaled into the identity corner
        params = scenario_params(1, 5)
        sigma = params.covariances[0]
        assert sigma[0, 0] == pytest.approx(1.0 / 0.19, rel=1e-12)
        assert sigma[0, 1] == pytest.approx(-0.9 / 0.19, rel=1e-12)
        assert np.allclose(sigma[2:, 2:], np.eye(3), atol=1e-12)
        corr = sigma[0, 1] / sigma[0, 0]
        assert corr == pytest.approx(-0.9, rel=1e-12)

    def test_contamination_law(self):
        params = scenario_params(1, 5)
        assert np.all(params.contamination[:5, 0] == -10.0)
        assert np.all(params.contamination[5:, 0] == 10.0)
        assert np.all(params.contamination[:, 1] == math.sqrt(0.2))

    def test_minimum_dimension(self):
        with pytest.raises(ValueError, match="p >= 2"):
            scenario_params(1, 1)


class TestScenarioTwoParams:
    def test_variance_ramps(self):
        params = scenario_params(2, 50)
        up = np.diag(params.covariances[0])
        down = np.diag(params.covariances[3])
        assert up[0] == 1.0 and up[-1] == 100.0
        assert down[0] == 100.0 and down[-1] == 1.0

    def test_condition_numbers_all_100(self):
        params = scenario_params(2, 50)
        for c in params.covariances:
            d = np.diag(c)
            assert d.max() / d.min() == pytest.approx(100.0, rel=1e-12)

    def test_mean_positions(self):
        p = 50
        params = scenario_params(2, p)
        assert params.means[0, 0] == pytest.approx(math.log(p))
        assert params.means[2, 2] == pytest.approx(math.log(p))
        # second block runs from the far end inward
        assert params.means[3, p - 2] == pytest.approx(math.log(p))
        assert params.means[5, p - 4] == pytest.approx(math.log(p))

    def test_contamination_law(self):
        params = scenario_params(2, 10)
        assert np.all(params.contamination[:, 0] == 0.0)
        assert np.all(params.contamination[:, 1] == math.sqrt(50.0))

    def test_precisions_invert_the_diagonals(self):
        params = scenario_params(2, 8)
        for c, t in zip(params.covariances, params.precisions):
            assert np.allclose(t @ c, np.eye(8), atol=1e-12)


class TestGenerate:
    spec = ScenarioSpec(scenario=1, p=5, n_test=200, replicates=1, seed=42)

    def test_shapes_and_group_sizes(self):
        train, test = generate(self.spec, 0)
        assert train.n == 300 and train.p == 5 and train.k == 10
        assert np.all(train.group_sizes == 30)
        assert test.n == 200
        assert np.isfinite(train.values).all() and np.isfinite(test.values).all()

    def test_deterministic_in_seed_and_replicate(self):
        a_train, a_test = generate(self.spec, 3)
        b_train, b_test = generate(self.spec, 3)
        assert np.array_equal(a_train.values, b_train.values)
        assert np.array_equal(a_test.values, b_test.values)
        assert np.array_equal(a_test.labels, b_test.labels)

    def test_replicates_differ(self):
        a_train, _ = generate(self.spec, 0)
        b_train, _ = generate(self.spec, 1)
        assert not np.array_equal(a_train.values, b_train.values)

    def test_test_labels_roughly_uniform(self):
        spec = ScenarioSpec(scenario=1, p=5, n_test=5000, replicates=1, seed=7)
        _, test = generate(spec, 0)
        counts = np.bincount(test.labels, minlength=11)[1:]
        expected = 500.0
        # 5 sigma of a binomial(5000, 1/10) count
        slack = 5.0 * math.sqrt(5000 * 0.1 * 0.9)
        assert np.all(np.abs(counts - expected) < slack)

    def test_group_means_match_the_law(self):
        # law of large numbers at 1e5 draws: 1e4 per group, 3 standard errors
        spec = ScenarioSpec(scenario=1, p=5, n_per_group=10000, n_test=1,
                            replicates=1, seed=5)
        params = scenario_params(1, 5)
        train, _ = generate(spec, 0)
        for g in range(10):
            block = train.group_values(g + 1)
            se = np.sqrt(np.diag(params.covariances[g]) / block.shape[0])
            assert np.all(np.abs(block.mean(axis=0) - params.means[g]) < 3.0 * se)

    def test_group_covariance_matches_the_law(self):
        spec = ScenarioSpec(scenario=1, p=5, n_per_group=20000, n_test=1,
                            replicates=1, seed=6)
        params = scenario_params(1, 5)
        train, _ = generate(spec, 0)
        emp = np.cov(train.group_values(1), rowvar=False)
        assert np.allclose(emp, params.covariances[0], atol=0.15)


class TestContaminate:
    def test_zero_epsilon_is_identity(self):
        spec = ScenarioSpec(scenario=1, p=5, epsilon=0.0, replicates=1, seed=9)
        train, _ = generate(spec, 0)
        assert contaminate(train, spec, 0) is train

    def test_exact_cell_count_per_group(self):
        spec = ScenarioSpec(scenario=1, p=5, epsilon=0.05, replicates=1, seed=9)
        train, _ = generate(spec, 0)
        dirty = contaminate(train, spec, 0)
        want = int(math.floor(0.05 * 30 * 5 + 0.5))
        assert want == 8
        for g in range(1, 11):
            changed = np.sum(train.group_values(g) != dirty.group_values(g))
            assert changed == want

    def test_rounding_is_half_up(self):
        # eps*n*p = 7.5 rounds to 8 cells
        spec = ScenarioSpec(scenario=1, p=5, epsilon=0.05, replicates=1, seed=9)
        train, _ = generate(spec, 0)
        dirty = contaminate(train, spec, 0)
        assert np.sum(train.values != dirty.values) == 8 * 10

    def test_replacements_follow_the_scenario_law(self):
        spec = ScenarioSpec(scenario=1, p=5, epsilon=0.2, replicates=1, seed=10)
        train, _ = generate(spec, 0)
        dirty = contaminate(train, spec, 0)
        mask = train.values != dirty.values
        front = dirty.values[:150][mask[:150]]
        back = dirty.values[150:][mask[150:]]
        # 30 cells per group, sd sqrt(0.2): the mean sits tight on +-10
        assert abs(front.mean() + 10.0) < 0.3
        assert abs(back.mean() - 10.0) < 0.3
        assert front.std() < 1.0 and back.std() < 1.0

    def test_untouched_cells_are_bit_identical(self):
        spec = ScenarioSpec(scenario=1, p=5, epsilon=0.1, replicates=1, seed=11)
        train, _ = generate(spec, 0)
        dirty = contaminate(train, spec, 0)
        mask = train.values != dirty.values
        assert np.array_equal(train.values[~mask], dirty.values[~mask])
        assert np.array_equal(train.labels, dirty.labels)

    def test_deterministic(self):
        spec = ScenarioSpec(scenario=1, p=5, epsilon=0.1, replicates=1, seed=12)
        train, _ = generate(spec, 0)
        a = contaminate(train, spec, 0)
        b = contaminate(train, spec, 0)
        assert np.array_equal(a.values, b.values)

    def test_row_touch_fraction_matches_sampling_without_replacement(self):
        # oracle: P(row untouched) for c draws from n*p cells is
        # C(n*p - p, c) / C(n*p, c)
        spec = ScenarioSpec(scenario=1, p=5, epsilon=0.05, n_per_group=30,
                            replicates=1, seed=13)
        cells = 30 * 5
        c = int(math.floor(0.05 * cells + 0.5))
        untouched = math.comb(cells - 5, c) / math.comb(cells, c)
        expect = 1.0 - untouched
        reps = 60
        touched = 0
        for rep in range(reps):
            train, _ = generate(spec, rep)
            dirty = contaminate(train, spec, rep)
            touched += int(np.sum(np.any(train.values != dirty.values, axis=1)))
        rate = touched / (reps * 300)
        sd = math.sqrt(expect * (1.0 - expect) / (reps * 300))
        assert abs(rate - expect) < 4.0 * sd


class TestRunBench:
    small = ScenarioSpec(scenario=1, p=5, n_test=40, replicates=2, seed=21)

    def test_oracle_is_exact_truth(self):
        result = run_bench(self.small, ("oracle",), n_jobs=1)
        assert np.all(np.abs(result.kl) < 1e-10)
        assert np.all(~result.na)
        assert np.all((result.cc >= 0.0) & (result.cc <= 100.0))

    def test_deterministic_across_runs_and_workers(self):
        methods = ("s-lda", "s-qda", "oracle")
        a = run_bench(self.small, methods, n_jobs=1)
        b = run_bench(self.small, methods, n_jobs=2)
        assert np.array_equal(a.cc, b.cc, equal_nan=True)
        assert np.array_equal(a.kl, b.kl, equal_nan=True)
        assert np.array_equal(a.na, b.na)

    def test_robust_methods_run_through_the_harness(self):
        result = run_bench(self.small, ("r-lda",), n_jobs=1)
        assert np.all(~result.na)
        assert np.isfinite(result.mean_cc("r-lda"))

    def test_na_recorded_without_aborting(self):
        # p = 30 with 5 rows per group leaves every group covariance singular
        spec = ScenarioSpec(scenario=1, p=30, n_per_group=5, n_test=20,
                            replicates=2, seed=22)
        result = run_bench(spec, ("s-qda", "s-lda"), n_jobs=1)
        assert result.na_count("s-qda") == 2
        assert result.na_count("s-lda") == 0
        assert math.isnan(result.mean_cc("s-qda"))
        assert np.isfinite(result.mean_cc("s-lda"))

    def test_unknown_method_rejected_up_front(self):
        with pytest.raises(ValueError, match="unknown method"):
            run_bench(self.small, ("qda",), n_jobs=1)

    def test_mean_excludes_na_replicates(self):
        cc = np.array([[80.0], [np.nan]])
        kl = np.array([[1.0], [np.nan]])
        na = np.array([[False], [True]])
        result = BenchResult(self.small, ("s-qda",), cc, kl, na)
        assert result.mean_cc("s-qda") == 80.0
        assert result.na_count("s-qda") == 1


class TestBenchExports:
    def result(self):
        return run_bench(TestRunBench.small, ("s-lda", "oracle"), n_jobs=1)

    def test_replicates_csv_shape(self):
        result = self.result()
        lines = bench_replicates_csv(result).strip().split("\n")
        assert lines[0] == "replicate,method,cc,kl,na"
        assert len(lines) == 1 + 2 * 2
        assert all(line.count(",") == 4 for line in lines)

    def test_na_rows_written_as_na(self):
        cc = np.array([[np.nan]])
        kl = np.array([[np.nan]])
        na = np.array([[True]])
        spec = ScenarioSpec(scenario=1, p=5, replicates=1, seed=1)
        text = bench_replicates_csv(BenchResult(spec, ("s-qda",), cc, kl, na))
        assert text.strip().split("\n")[1] == "0,s-qda,NA,NA,1"

    def test_summary_json_content(self):
        result = self.result()
        doc = json.loads(bench_summary_json(result))
        assert doc["version"] == "cellshield-bench/1"
        assert doc["scenario"] == 1 and doc["p"] == 5 and doc["k"] == 10
        assert doc["generator"] == "philox4x64"
        assert doc["normal_sampler"] == "inverse_cdf"
        assert set(doc["methods"]) == {"s-lda", "oracle"}
        entry = doc["methods"]["s-lda"]
        assert set(entry) == {"mean_cc", "mean_kl", "na_count"}
        assert entry["na_count"] == 0
        assert 0.0 <= entry["mean_cc"] <= 100.0

    def test_summary_json_writes_nan_as_null(self):
        cc = np.array([[np.nan]])
        kl = np.array([[np.nan]])
        na = np.array([[True]])
        spec = ScenarioSpec(scenario=1, p=5, replicates=1, seed=1)
        doc = json.loads(bench_summary_json(BenchResult(spec, ("s-qda",), cc, kl, na)))
        assert doc["methods"]["s-qda"]["mean_cc"] is None
        assert doc["methods"]["s-qda"]["na_count"] == 1
