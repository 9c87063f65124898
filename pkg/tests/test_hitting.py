import math
from dataclasses import replace

import numpy as np
import pytest

from sbmwalks import (
    BlockModelConfig,
    GraphConnectivityError,
    build_rescaled,
    decompose,
    derive,
    eigensum_decomposition,
    exact_hitting,
    exact_hitting_column,
    exact_target_average,
    mc_hitting,
    sample,
    spectral_start_hitting,
    spectral_target_hitting,
    stationary_distribution,
)
from sbmwalks.hitting import write_hitting_csv
from sbmwalks.spectral import NumericalError

from conftest import connected_sample


def normalized_decomposition(graph, config):
    return decompose(build_rescaled(graph, derive(config)).normalized, "normalized")


@pytest.fixture(scope="module")
def two_vertex():
    cfg = BlockModelConfig(n=2, m=1, p=(1.0,), q=0.0, allow_loops=False)
    return cfg, sample(cfg)


@pytest.fixture(scope="module")
def complete_loops():
    cfg = BlockModelConfig(n=30, m=1, p=(1.0,), q=0.0, allow_loops=True)
    return cfg, sample(cfg)


@pytest.fixture(scope="module")
def sbm_150():
    cfg = BlockModelConfig(n=150, m=2, p=(0.4, 0.2), q=0.1, seed=12)
    g = connected_sample(cfg)
    return cfg, g, exact_hitting(g), normalized_decomposition(g, cfg)


class TestExactHitting:
    def test_two_vertex_edge(self, two_vertex):
        _, g = two_vertex
        res = exact_hitting(g)
        np.testing.assert_allclose(res.hitting_matrix, [[0.0, 1.0], [1.0, 0.0]], atol=1e-12)
        np.testing.assert_allclose(res.stationary, [0.5, 0.5], atol=0)
        np.testing.assert_allclose(res.start_averaged, [0.5, 0.5], atol=1e-12)
        np.testing.assert_allclose(res.target_averaged, [0.5, 0.5], atol=1e-12)

    def test_complete_graph_with_loops(self, complete_loops):
        # uniform transition over all n vertices: geometric waiting time n
        _, g = complete_loops
        res = exact_hitting(g)
        n = g.n
        off = ~np.eye(n, dtype=bool)
        np.testing.assert_allclose(res.hitting_matrix[off], float(n), rtol=1e-12)
        np.testing.assert_allclose(res.start_averaged, float(n - 1), rtol=1e-12)
        np.testing.assert_allclose(res.target_averaged, float(n - 1), rtol=1e-12)

    def test_column_solver_matches_matrix(self, sbm_150):
        _, g, res, _ = sbm_150
        for w in (0, 42, 149):
            col = exact_hitting_column(g, w)
            np.testing.assert_allclose(col, res.hitting_matrix[:, w], rtol=1e-9, atol=1e-9)
            assert exact_target_average(g, w) == pytest.approx(res.target_averaged[w], rel=1e-9)

    def test_diag_zero_offdiag_positive(self, sbm_150):
        _, g, res, _ = sbm_150
        h = res.hitting_matrix
        assert np.all(np.diagonal(h) == 0.0)
        off = ~np.eye(g.n, dtype=bool)
        assert h[off].min() > 0.0

    def test_disconnected_rejected(self):
        g = sample(BlockModelConfig(n=20, m=2, p=(1.0, 1.0), q=0.0))
        with pytest.raises(GraphConnectivityError):
            exact_hitting(g)
        with pytest.raises(GraphConnectivityError):
            exact_hitting_column(g, 0)

    def test_stationary_is_invariant(self, sbm_150):
        # pi P = pi for the walk with loops, to machine precision
        _, g, res, _ = sbm_150
        p = g.adjacency / g.degrees[:, None]
        np.testing.assert_allclose(res.stationary @ p, res.stationary, atol=1e-12)
        assert res.stationary.sum() == pytest.approx(1.0, abs=1e-12)

    def test_matrix_free_variant_agrees(self, sbm_150):
        _, g, res, _ = sbm_150
        lean = exact_hitting(g, compute_matrix=False)
        assert lean.hitting_matrix is None
        np.testing.assert_allclose(lean.target_averaged, res.target_averaged, rtol=1e-9)
        np.testing.assert_allclose(lean.start_averaged, res.start_averaged, rtol=1e-9)


class TestSpectralStart:
    def test_complete_graph(self, complete_loops):
        cfg, g = complete_loops
        assert spectral_start_hitting(normalized_decomposition(g, cfg)) == pytest.approx(
            g.n - 1, rel=1e-10
        )

    def test_two_vertex(self, two_vertex):
        cfg, g = two_vertex
        # single non-unit eigenvalue -1 contributes 1/(1-(-1)) = 1/2
        assert spectral_start_hitting(normalized_decomposition(g, cfg)) == pytest.approx(0.5, abs=1e-12)

    def test_matches_exact_on_sample(self, sbm_150):
        _, _, res, dec = sbm_150
        spectral = spectral_start_hitting(dec)
        rel = np.abs(res.start_averaged - spectral) / spectral
        assert rel.max() <= 1e-6

    def test_disconnected_degenerate_error(self):
        g = sample(BlockModelConfig(n=20, m=2, p=(1.0, 1.0), q=0.0))
        # build the normalized matrix by hand: build_rescaled would reject
        d = g.degrees.astype(float)
        b = g.adjacency / np.sqrt(np.outer(d, d))
        with pytest.raises(NumericalError, match="disconnected or bipartite-degenerate"):
            spectral_start_hitting(decompose(b, "normalized"))


class TestSpectralTarget:
    def test_complete_graph(self, complete_loops):
        cfg, g = complete_loops
        dec = normalized_decomposition(g, cfg)
        for w in (0, 7, 29):
            assert spectral_target_hitting(dec, g, w) == pytest.approx(g.n - 1, rel=1e-10)

    def test_two_vertex(self, two_vertex):
        cfg, g = two_vertex
        dec = normalized_decomposition(g, cfg)
        # prefactor 2/1, eigenterm (1/2)/2: hitting time 1/2
        assert spectral_target_hitting(dec, g, 1) == pytest.approx(0.5, abs=1e-12)

    def test_matches_exact_on_sample(self, sbm_150):
        _, g, res, dec = sbm_150
        rng = np.random.default_rng(3)
        for w in rng.choice(g.n, size=10, replace=False):
            spectral = spectral_target_hitting(dec, g, int(w))
            exact = res.target_averaged[w]
            assert abs(spectral - exact) / exact <= 1e-6

    def test_all_targets_within_tolerance(self, sbm_150):
        _, g, res, dec = sbm_150
        for w in range(g.n):
            spectral = spectral_target_hitting(dec, g, w)
            assert abs(spectral - res.target_averaged[w]) / res.target_averaged[w] <= 1e-6


class TestEigensumDecomposition:
    def test_complete_graph_terms(self, complete_loops):
        cfg, g = complete_loops
        dec = normalized_decomposition(g, cfg)
        zd = eigensum_decomposition(dec, g, 0)
        n = g.n
        assert zd.diag_term == pytest.approx(1.0 / n, abs=1e-14)
        assert zd.stationary_term == pytest.approx(2.0 / n, abs=1e-14)
        assert zd.tail == pytest.approx(0.0, abs=1e-12)
        assert zd.total == pytest.approx(1.0 - 1.0 / n, abs=1e-12)

    def test_two_vertex_terms(self, two_vertex):
        cfg, g = two_vertex
        zd = eigensum_decomposition(normalized_decomposition(g, cfg), g, 0)
        assert zd.diag_term == 0.0
        assert zd.stationary_term == pytest.approx(1.0, abs=1e-14)
        assert zd.tail == pytest.approx(0.25, abs=1e-12)
        assert zd.total == pytest.approx(0.25, abs=1e-12)
        assert zd.eigensum == pytest.approx(0.25, abs=1e-12)

    def test_identity_and_tail_on_sample(self):
        cfg = BlockModelConfig(n=500, m=2, p=(0.2, 0.2), q=0.05, seed=1)
        g = connected_sample(cfg)
        dec = normalized_decomposition(g, cfg)
        params = derive(cfg)
        rng = np.random.default_rng(9)
        for w in rng.choice(g.n, size=5, replace=False):
            zd = eigensum_decomposition(dec, g, int(w), params=params)
            assert abs(zd.total - zd.eigensum) <= 1e-9
            assert zd.tail < 0.05
            assert zd.regime == "assortative"  # kappa surrogate 0.25
            assert zd.tail <= zd.tail_envelope

    def test_mixed_regime_envelope(self):
        cfg = BlockModelConfig(n=200, m=2, p=(0.2, 0.2), q=0.3, seed=2)
        g = connected_sample(cfg)
        zd = eigensum_decomposition(normalized_decomposition(g, cfg), g, 0, params=derive(cfg))
        assert zd.regime == "mixed"
        assert zd.tail_envelope == pytest.approx(zd.constant / derive(cfg).gamma_min, rel=1e-12)


class TestLoopInvariance:
    def test_loop_removal_barely_moves_start_average(self):
        # same seed keeps the off-diagonal edges; dropping loops changes the
        # start-averaged hitting time by far less than 2% of n
        base = dict(n=2000, m=2, p=(0.2, 0.2), q=0.05)
        worst = 0.0
        for seed in range(20):
            with_loops = sample(BlockModelConfig(**base, seed=seed, allow_loops=True))
            without = sample(BlockModelConfig(**base, seed=seed, allow_loops=False))
            h_with = exact_hitting(with_loops, compute_matrix=False).start_averaged[0]
            h_without = exact_hitting(without, compute_matrix=False).start_averaged[0]
            worst = max(worst, abs(h_with - h_without) / base["n"])
        assert worst <= 0.02


class TestMcHitting:
    def test_same_start_and_target(self, sbm_150):
        _, g, _, _ = sbm_150
        est = mc_hitting(g, 5, 5, n_walks=100, seed=1)
        assert est.estimate == 0.0
        assert est.std_error == 0.0
        assert not est.biased

    def test_two_vertex_deterministic_step(self, two_vertex):
        _, g = two_vertex
        est = mc_hitting(g, 0, 1, n_walks=10_000, seed=2)
        assert est.estimate == 1.0
        assert est.std_error == 0.0

    def test_complete_graph_geometric(self, complete_loops):
        cfg, g = complete_loops
        n = 50
        g = sample(replace(cfg, n=n))
        est = mc_hitting(g, 0, 17, n_walks=10_000, seed=3)
        assert abs(est.estimate - n) <= 3.0 * est.std_error
        assert est.truncated == 0

    def test_matches_exact_within_three_sigmas(self, sbm_150):
        _, g, res, _ = sbm_150
        est = mc_hitting(g, 3, 77, n_walks=4_000, seed=4)
        assert abs(est.estimate - res.hitting_matrix[3, 77]) <= 3.0 * est.std_error

    def test_truncation_reported_and_biased(self, sbm_150):
        _, g, _, _ = sbm_150
        est = mc_hitting(g, 3, 77, n_walks=50, max_steps=2, seed=5)
        assert est.truncated > 0
        assert est.biased

    def test_reproducible(self, sbm_150):
        _, g, _, _ = sbm_150
        a = mc_hitting(g, 0, 10, n_walks=500, seed=6)
        b = mc_hitting(g, 0, 10, n_walks=500, seed=6)
        assert a == b


class TestHittingCsv:
    def test_columns_and_footer(self, tmp_path, sbm_150):
        _, g, res, dec = sbm_150
        targets = [0, 5]
        spectral = {w: spectral_target_hitting(dec, g, w) for w in targets}
        mc = {w: mc_hitting(g, 0, w, n_walks=200, seed=1) for w in targets}
        path = tmp_path / "h.csv"
        write_hitting_csv(g, targets, res, spectral, mc, path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "w,block,d_w,H_w_exact,H_w_spectral,H_w_mc,mc_stderr"
        assert len(lines) == 4
        assert lines[-1].startswith("# H_start,")
        row = lines[1].split(",")
        assert int(row[0]) == 0
        assert float(row[3]) == pytest.approx(res.target_averaged[0], rel=1e-12)
