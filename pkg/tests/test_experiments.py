import math

import numpy as np
import pytest
from scipy.special import ndtr

from sbmwalks import (
    BlockModelConfig,
    ExperimentPlan,
    GraphConnectivityError,
    derive,
    run_bounds,
    run_clt_edges,
    run_clt_target,
    run_lln,
)
from sbmwalks.experiments import ks_distance, normal_cdf, summarize_clt


def complete_config(n=40):
    return BlockModelConfig(n=n, m=2, p=(1.0, 1.0), q=1.0, seed=5)


class TestRunLln:
    def test_complete_graph_start_ratio_exact(self):
        # complete graph with loops: start average is n - 1 in every replicate
        plan = ExperimentPlan(config=complete_config(), replicates=3, mode="lln_start")
        result = run_lln(plan)
        assert len(result.records) == 3
        for rec in result.records:
            assert rec.ratio == pytest.approx((40 - 1) / 40, rel=1e-12)
        assert result.max_abs_deviation == pytest.approx(1 / 40, rel=1e-12)

    def test_complete_graph_target_ratio_exact(self):
        plan = ExperimentPlan(config=complete_config(), replicates=2, mode="lln_target")
        result = run_lln(plan)
        # one record per block per replicate; gamma_block = gamma_bar = n
        assert len(result.records) == 4
        for rec in result.records:
            assert rec.ratio == pytest.approx((40 - 1) / 40, rel=1e-12)

    def test_moderate_sbm_close_to_prediction(self):
        config = BlockModelConfig(n=400, m=2, p=(0.3, 0.2), q=0.1, seed=3)
        plan = ExperimentPlan(config=config, replicates=3, mode="lln_target")
        result = run_lln(plan)
        assert result.max_abs_deviation <= 0.10

    def test_explicit_targets(self):
        config = BlockModelConfig(n=60, m=2, p=(0.6, 0.5), q=0.3, seed=3)
        plan = ExperimentPlan(config=config, replicates=2, mode="lln_target", targets=(0, 30, 59))
        result = run_lln(plan)
        assert len(result.records) == 6
        assert {rec.target for rec in result.records} == {0, 30, 59}

    def test_first_of_block_targets(self):
        config = BlockModelConfig(n=60, m=3, p=(0.6, 0.5, 0.4), q=0.3, seed=3)
        plan = ExperimentPlan(config=config, replicates=1, mode="lln_target", targets="first_of_block")
        result = run_lln(plan)
        assert [rec.target for rec in result.records] == [0, 20, 40]

    def test_mode_mismatch_rejected(self):
        plan = ExperimentPlan(config=complete_config(), replicates=1, mode="clt_edges")
        with pytest.raises(ValueError, match="mode"):
            run_lln(plan)

    def test_resampling_until_connected_is_logged(self):
        # sparse cross-block edges: some replicates need several attempts
        config = BlockModelConfig(n=40, m=2, p=(0.5, 0.5), q=0.004, seed=1)
        plan = ExperimentPlan(config=config, replicates=20, mode="lln_start")
        result = run_lln(plan)
        assert any(rec.resamples > 0 for rec in result.records)

    def test_impossible_connectivity_errors_out(self):
        config = BlockModelConfig(n=40, m=2, p=(0.5, 0.5), q=0.0, seed=1)
        plan = ExperimentPlan(config=config, replicates=1, mode="lln_start", resample_cap=3)
        with pytest.raises(GraphConnectivityError, match="attempts"):
            run_lln(plan)

    def test_csv_written(self, tmp_path):
        out = tmp_path / "lln.csv"
        plan = ExperimentPlan(config=complete_config(), replicates=2, mode="lln_start", output=str(out))
        run_lln(plan)
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "replicate,block,target,ratio,resamples"
        assert lines[-1].startswith("# max_abs_deviation,")


class TestRunCltEdges:
    def test_degenerate_probabilities_rejected(self):
        plan = ExperimentPlan(config=complete_config(), replicates=10, mode="clt_edges")
        with pytest.raises(ValueError, match="no edge randomness"):
            run_clt_edges(plan)

    def test_edge_count_center_and_spread(self):
        config = BlockModelConfig(n=300, m=2, p=(0.3, 0.3), q=0.1, seed=7)
        params = derive(config)
        plan = ExperimentPlan(config=config, replicates=200, mode="clt_edges")
        result = run_clt_edges(plan)
        # mean of |E| within 4 tau / sqrt(R) of its expectation
        mu = params.mu_in + params.mu_out
        tau = math.sqrt(params.tau2)
        raw_mean = np.mean([r.raw for r in result.records])
        assert abs(raw_mean - mu) <= 4.0 * tau / math.sqrt(200)
        assert result.summary.ks_distance <= 0.2
        assert abs(result.summary.mean) <= 0.5

    def test_histogram_written(self, tmp_path):
        out = tmp_path / "edges.csv"
        config = BlockModelConfig(n=100, m=2, p=(0.3, 0.3), q=0.1, seed=7)
        plan = ExperimentPlan(config=config, replicates=30, mode="clt_edges", output=str(out))
        run_clt_edges(plan)
        hist = tmp_path / "edges_hist.csv"
        assert hist.exists()
        lines = hist.read_text().strip().split("\n")
        assert lines[0] == "bin_left,bin_right,count"
        counts = sum(int(line.split(",")[2]) for line in lines[1:])
        assert counts == 30


class TestRunCltTarget:
    def test_identical_scaling_on_heterogeneous_p_rejected(self):
        config = BlockModelConfig(n=60, m=2, p=(0.5, 0.3), q=0.2, seed=2)
        plan = ExperimentPlan(config=config, replicates=2, mode="clt_target", clt_scaling="identical")
        with pytest.raises(ValueError, match="differ"):
            run_clt_target(plan)

    def test_target_is_first_vertex_of_block(self):
        config = BlockModelConfig(n=60, m=3, p=(0.6, 0.5, 0.4), q=0.3, seed=2)
        plan = ExperimentPlan(config=config, replicates=2, mode="clt_target", target_block=1)
        result = run_clt_target(plan)
        assert result.target == 20

    def test_scaling_modes_differ_by_variance_factor(self):
        # same replicates standardized both ways: the samples differ exactly
        # by sqrt(1 - alpha)
        config = BlockModelConfig(n=200, m=2, p=(0.2, 0.2), q=0.1, seed=6)
        base = dict(config=config, replicates=15, mode="clt_target")
        general = run_clt_target(ExperimentPlan(**base, clt_scaling="general"))
        identical = run_clt_target(ExperimentPlan(**base, clt_scaling="identical"))
        alpha = derive(config).alpha
        gen = np.array([r.statistic for r in general.records])
        ident = np.array([r.statistic for r in identical.records])
        np.testing.assert_allclose(gen, ident / math.sqrt(1 - alpha), rtol=1e-9)
        assert general.summary.target_variance == 1.0
        assert identical.summary.target_variance == pytest.approx(1 - alpha, rel=1e-12)

    def test_moderate_run_is_roughly_centered(self):
        config = BlockModelConfig(n=300, m=2, p=(0.15, 0.15), q=0.08, seed=4)
        plan = ExperimentPlan(config=config, replicates=60, mode="clt_target")
        result = run_clt_target(plan)
        assert abs(result.summary.mean) <= 1.0
        assert 0.05 <= result.summary.variance / result.summary.target_variance <= 5.0


class TestRunBounds:
    def test_complete_graph_all_pass(self):
        plan = ExperimentPlan(config=complete_config(), replicates=2, mode="bounds")
        result = run_bounds(plan)
        assert all(f == 1.0 for f in result.pass_fraction.values())

    def test_moderate_sample_summary(self):
        config = BlockModelConfig(n=300, m=2, p=(0.3, 0.3), q=0.1, seed=11)
        plan = ExperimentPlan(config=config, replicates=3, mode="bounds")
        result = run_bounds(plan)
        assert set(result.pass_fraction) == {
            "centered_spectral_norm",
            "correction_inf_norm",
            "structural_eigenvalues",
            "bulk_eigenvalues",
            "second_eigenvalue_conductance",
        }
        assert all(f == 1.0 for f in result.pass_fraction.values())
        assert set(result.calibrated_c) == {
            "centered_spectral_norm",
            "structural_eigenvalues",
            "bulk_eigenvalues",
        }
        assert len(result.records) == 15

    def test_csv_written(self, tmp_path):
        out = tmp_path / "bounds.csv"
        plan = ExperimentPlan(config=complete_config(), replicates=1, mode="bounds", output=str(out))
        run_bounds(plan)
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "replicate,bound,empirical,envelope,satisfied,resamples"
        assert any(line.startswith("# pass_fraction,") for line in lines)


class TestDeterminism:
    def test_identical_plan_bitwise_identical_csv(self, tmp_path):
        config = BlockModelConfig(n=80, m=2, p=(0.4, 0.3), q=0.1, seed=9)
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (out1, out2):
            run_lln(ExperimentPlan(config=config, replicates=4, mode="lln_target", output=str(out)))
        assert out1.read_bytes() == out2.read_bytes()

    def test_threads_do_not_change_output(self, tmp_path):
        config = BlockModelConfig(n=60, m=2, p=(0.5, 0.4), q=0.2, seed=9)
        seq, par = tmp_path / "seq.csv", tmp_path / "par.csv"
        run_lln(ExperimentPlan(config=config, replicates=4, mode="lln_target", output=str(seq), threads=1))
        run_lln(ExperimentPlan(config=config, replicates=4, mode="lln_target", output=str(par), threads=2))
        assert seq.read_bytes() == par.read_bytes()

    def test_base_seed_overrides_config_seed(self):
        config = BlockModelConfig(n=60, m=2, p=(0.5, 0.4), q=0.2, seed=9)
        a = run_lln(ExperimentPlan(config=config, replicates=2, mode="lln_start"))
        b = run_lln(ExperimentPlan(config=config, replicates=2, mode="lln_start", base_seed=123))
        assert a.records != b.records


class TestSummaries:
    def test_normal_cdf_against_scipy(self):
        xs = np.linspace(-6, 6, 101)
        ours = np.array([normal_cdf(x) for x in xs])
        np.testing.assert_allclose(ours, ndtr(xs), atol=1e-7)

    def test_normal_cdf_with_variance(self):
        assert normal_cdf(0.0, variance=0.5) == 0.5
        assert normal_cdf(2.0, variance=4.0) == pytest.approx(float(ndtr(1.0)), abs=1e-12)

    def test_ks_distance_of_quantile_grid(self):
        # samples placed at the (i - 1/2)/n quantiles have distance 1/(2n)
        n = 100
        qs = (np.arange(n) + 0.5) / n
        samples = [math.sqrt(2.0) * _erfinv(2.0 * u - 1.0) for u in qs]
        assert ks_distance(samples, normal_cdf) == pytest.approx(0.5 / n, abs=1e-10)

    def test_ks_distance_bounds(self):
        rng = np.random.default_rng(0)
        d = ks_distance(rng.normal(size=500), normal_cdf)
        assert 0.0 <= d <= 1.0
        assert d <= 0.1

    def test_degenerate_point_mass_flagged(self):
        summary = summarize_clt(np.zeros(50), target_variance=1.0)
        assert summary.degenerate
        assert summary.variance == 0.0
        assert summary.skewness == 0.0
        assert summary.ks_distance == pytest.approx(0.5, abs=1e-12)

    def test_moments_match_numpy(self):
        rng = np.random.default_rng(1)
        xs = rng.normal(size=400)
        summary = summarize_clt(xs, target_variance=1.0)
        assert summary.mean == pytest.approx(xs.mean(), rel=1e-12)
        assert summary.variance == pytest.approx(xs.var(ddof=1), rel=1e-12)
        c = xs - xs.mean()
        assert summary.skewness == pytest.approx(np.mean(c**3) / np.mean(c**2) ** 1.5, rel=1e-12)


def _erfinv(y):
    # bisection inverse of erf on (-1, 1); accuracy ~1e-12 is plenty here
    lo, hi = -10.0, 10.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if math.erf(mid) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestPlanValidation:
    def test_unknown_mode(self):
        with pytest.raises(ValueError, match="unknown mode"):
            ExperimentPlan(config=complete_config(), replicates=1, mode="nope")

    def test_bad_replicates(self):
        with pytest.raises(ValueError, match="replicates"):
            ExperimentPlan(config=complete_config(), replicates=0, mode="lln_start")

    def test_bad_target_block(self):
        with pytest.raises(ValueError, match="target_block"):
            ExperimentPlan(config=complete_config(), replicates=1, mode="clt_target", target_block=5)

    def test_bad_explicit_targets(self):
        with pytest.raises(ValueError, match="out of range"):
            ExperimentPlan(config=complete_config(), replicates=1, mode="lln_target", targets=(100,))
