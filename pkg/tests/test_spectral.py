"""Chebyshev filtering, eigencounts, coherence estimation and the dense oracle."""

import numpy as np
import pytest
import scipy.sparse as sp

import graphsampling as gs
from graphsampling.errors import InvalidParameterError

from oracles import dense_adjacency, hops_from, random_bandlimited, spearman


class TestLambdaMax:
    def test_p3(self, p3):
        assert gs.lambda_max_bound(gs.laplacian(p3)) >= 3.0

    def test_k2(self):
        assert gs.lambda_max_bound(gs.laplacian(gs.gen_path(2))) >= 2.0

    def test_normalized_cap(self):
        lap = gs.laplacian(gs.gen_sensor_knn(300, 6, seed=1), "normalized")
        assert lap.lambda_max_bound <= 2.02

    @pytest.mark.parametrize("model,n", [("sensor_knn", 150), ("sensor_knn", 600), ("barabasi_albert", 400),
                                         ("path", 500), ("grid", 400)])
    def test_upper_bound(self, model, n):
        lap = gs.laplacian(gs.make_graph(model, n, seed=3))
        true = np.linalg.eigvalsh(lap.matrix.toarray())[-1]
        assert true <= lap.lambda_max_bound <= 1.02 * true

    def test_no_edges(self):
        g = gs.SparseGraph(sp.csr_matrix((4, 4)))
        assert gs.lambda_max_bound(gs.laplacian(g)) == 1.0


class TestDesignLowpass:
    grid = np.linspace(0.0, 4.0, 1000)

    def test_range_bounded(self):
        for frac in (0.05, 0.3, 0.5, 0.9):
            h = gs.design_lowpass(frac * 4.0, 30, 4.0)
            vals = h(self.grid)
            assert vals.min() >= -0.15 and vals.max() <= 1.15

    def test_mid_interval_error(self):
        lc = 2.0
        h = gs.design_lowpass(lc, 30, 4.0)
        keep = np.abs(self.grid - lc) > 0.05 * 4.0
        err = np.abs(h(self.grid) - (self.grid <= lc))[keep]
        assert err.max() <= 0.1

    def test_jackson_option(self):
        h = gs.design_lowpass(2.0, 30, 4.0, damping="jackson")
        assert h.damping == "jackson"
        assert h(0.0) == pytest.approx(1.0, abs=0.05)

    def test_all_pass_near_top(self):
        h = gs.design_lowpass(4.0 * 0.99995, 30, 4.0)
        np.testing.assert_allclose(h(self.grid), 1.0)

    def test_tiny_cutoff(self):
        h = gs.design_lowpass(1e-6, 30, 4.0)
        assert np.abs(h(self.grid[self.grid > 0.8])).max() < 0.01

    @pytest.mark.parametrize("args", [(0.0, 30, 4.0), (1.0, 0, 4.0), (1.0, 30, 0.0), (1.0, 30, None)])
    def test_invalid(self, args):
        with pytest.raises(InvalidParameterError):
            gs.design_lowpass(*args)

    def test_unknown_damping(self):
        with pytest.raises(InvalidParameterError):
            gs.design_lowpass(1.0, 10, 4.0, damping="hann")

    def test_csv_roundtrip(self, tmp_path):
        h = gs.design_lowpass(1.3, 12, 4.0)
        h.to_csv(tmp_path / "h.csv")
        back = gs.ChebyshevFilter.from_csv(tmp_path / "h.csv")
        assert back.lambda_max == h.lambda_max
        np.testing.assert_array_equal(back.coeffs, h.coeffs)

    def test_chebyshev_fit_smooth(self):
        p = gs.chebyshev_fit(lambda x: 1.0 / (1.0 + x), 20, 4.0)
        np.testing.assert_allclose(p(self.grid), 1.0 / (1.0 + self.grid), atol=1e-8)


class TestApplyFilter:
    def test_all_pass_identity(self, sensor100, rng):
        _, lap, _ = sensor100
        X = rng.standard_normal((100, 3))
        ident = gs.ChebyshevFilter(np.array([1.0]), lap.lambda_max_bound)
        np.testing.assert_array_equal(gs.apply_filter(lap, ident, X), X)

    def test_matches_dense_polynomial(self, sensor100, rng):
        _, lap, oracle = sensor100
        h = gs.design_lowpass(0.4 * lap.lambda_max_bound, 15, lap.lambda_max_bound)
        X = rng.standard_normal((100, 2))
        dense = (oracle.U * h(oracle.evals)) @ (oracle.U.T @ X)
        np.testing.assert_allclose(gs.apply_filter(lap, h, X), dense, atol=1e-10)

    def test_close_to_projector(self, sensor100):
        _, lap, oracle = sensor100
        R = 20
        lc = 0.5 * (oracle.evals[R - 1] + oracle.evals[R])
        h = gs.design_lowpass(lc, 50, lap.lambda_max_bound)
        for v in (0, 17, 63):
            e = np.zeros(100)
            e[v] = 1.0
            err = np.linalg.norm(gs.apply_filter(lap, h, e) - gs.exact_filtered_delta(oracle, R, v))
            assert err <= 0.1

    def test_linearity(self, sensor100, rng):
        _, lap, _ = sensor100
        h = gs.design_lowpass(1.0, 30, lap.lambda_max_bound)
        X, Y = rng.standard_normal((2, 100))
        a, b = 1.7, -0.3
        np.testing.assert_allclose(gs.apply_filter(lap, h, a * X + b * Y),
                                   a * gs.apply_filter(lap, h, X) + b * gs.apply_filter(lap, h, Y), atol=1e-10)

    def test_locality(self):
        g = gs.gen_path(60)
        lap = gs.laplacian(g)
        d = 10
        h = gs.design_lowpass(1.0, d, lap.lambda_max_bound)
        e = np.zeros(60)
        e[0] = 1.0
        out = gs.apply_filter(lap, h, e)
        far = hops_from(dense_adjacency(g), 0) > d
        assert np.abs(out[far]).max() <= 1e-12

    def test_columns_independent(self, sensor100, rng):
        _, lap, _ = sensor100
        h = gs.design_lowpass(1.0, 30, lap.lambda_max_bound)
        X = rng.standard_normal((100, 4))
        full = gs.apply_filter(lap, h, X)
        np.testing.assert_array_equal(full[:, 2], gs.apply_filter(lap, h, X[:, 2:3])[:, 0])


class TestEigencount:
    def test_all_counted(self, sensor100):
        _, lap, _ = sensor100
        c = gs.eigencount_below(lap, lap.lambda_max_bound, seed=0)
        assert abs(c - 100) <= 10

    def test_single_zero_eigenvalue(self):
        lap = gs.laplacian(gs.gen_grid(6, 6))
        ev = np.linalg.eigvalsh(lap.matrix.toarray())
        c = gs.eigencount_below(lap, 0.5 * ev[1], n_projections=200, seed=1, degree=60)
        assert abs(c - 1) <= 0.5

    def test_p3(self, p3):
        c = gs.eigencount_below(gs.laplacian(p3), 2.0, n_projections=500, seed=2)
        assert abs(c - 2) <= 0.5

    def test_monotone(self, sensor100):
        _, lap, _ = sensor100
        lams = np.linspace(0.05, 1.0, 30) * lap.lambda_max_bound
        counts = [gs.eigencount_below(lap, lam, 200, seed=4) for lam in lams]
        assert np.all(np.diff(counts) >= 0)


class TestCoherence:
    def test_full_band(self, sensor100):
        _, lap, _ = sensor100
        prof = gs.estimate_coherence(lap, 100, seed=1)
        assert prof.lambda_s >= lap.lambda_max_bound
        np.testing.assert_allclose(prof.sq_coherence, 1.0, atol=0.1)
        assert prof.converged

    def test_spearman_small(self, sensor100):
        _, lap, oracle = sensor100
        prof = gs.estimate_coherence(lap, 20, c=10, seed=2)
        assert spearman(prof.sq_coherence, gs.exact_coherence(oracle, 20)) >= 0.9

    def test_bounds_and_sum(self, sensor500):
        _, lap, _ = sensor500
        prof = gs.estimate_coherence(lap, 50, seed=3)
        assert prof.sq_coherence.min() >= 0
        assert prof.sq_coherence.max() <= 1.1
        assert prof.sq_coherence.sum() == pytest.approx(prof.count_estimate)
        assert 50 <= prof.count_estimate <= 55
        assert prof.n_projections == gs.spectral.coherence_projections(50, 10)

    def test_deterministic(self, sensor100):
        _, lap, _ = sensor100
        a = gs.estimate_coherence(lap, 20, seed=(1, 2))
        b = gs.estimate_coherence(lap, 20, seed=(1, 2))
        assert a.lambda_s == b.lambda_s
        np.testing.assert_array_equal(a.sq_coherence, b.sq_coherence)

    def test_gaussian_probes(self, sensor100):
        _, lap, oracle = sensor100
        prof = gs.estimate_coherence(lap, 20, seed=5, distribution="gaussian")
        assert spearman(prof.sq_coherence, gs.exact_coherence(oracle, 20)) >= 0.8

    def test_iteration_cap(self, sensor100):
        _, lap, _ = sensor100
        prof = gs.estimate_coherence(lap, 20, eps=0.0, seed=1, max_iter=2)
        assert not prof.converged
        assert prof.iterations == 2

    def test_s_too_large(self, p3):
        with pytest.raises(InvalidParameterError):
            gs.estimate_coherence(gs.laplacian(p3), 4)


class TestEigenOracle:
    def test_orthonormal_and_eigen(self, sensor100):
        _, lap, oracle = sensor100
        U, ev = oracle.U, oracle.evals
        np.testing.assert_allclose(U.T @ U, np.eye(100), atol=1e-10)
        LU = lap.matrix @ U
        assert np.linalg.norm(LU - U * ev) <= 1e-8 * np.linalg.norm(LU)
        assert np.all(np.diff(ev) >= 0)

    def test_full_band_delta(self, sensor100):
        _, _, oracle = sensor100
        e = np.zeros(100)
        e[7] = 1.0
        np.testing.assert_allclose(gs.exact_filtered_delta(oracle, 100, 7), e, atol=1e-12)

    def test_coherence_trace(self, sensor100):
        _, _, oracle = sensor100
        for R in (1, 10, 37):
            assert gs.exact_coherence(oracle, R).sum() == pytest.approx(R, abs=1e-9)

    def test_band_index_set(self, sensor100):
        _, _, oracle = sensor100
        np.testing.assert_array_equal(oracle.band([0, 2]), oracle.U[:, [0, 2]])

    def test_reproducing_inner_products(self, sensor100):
        _, _, oracle = sensor100
        R = 15
        D = np.column_stack([gs.exact_filtered_delta(oracle, R, v) for v in range(100)])
        np.testing.assert_allclose(D.T @ D, D, atol=1e-10)
        np.testing.assert_allclose(np.diag(D), gs.exact_coherence(oracle, R), atol=1e-12)

    def test_idempotent(self, sensor100):
        _, _, oracle = sensor100
        UR = oracle.band(12)
        d = gs.exact_filtered_delta(oracle, 12, 5)
        np.testing.assert_allclose(UR @ (UR.T @ d), d, atol=1e-10)

    def test_reproducing_signals(self, sensor100, rng):
        _, _, oracle = sensor100
        R = 25
        F = random_bandlimited(oracle.U, R, rng, size=100)
        D = np.column_stack([gs.exact_filtered_delta(oracle, R, v) for v in range(100)])
        assert np.abs(D.T @ F - F).max() <= 1e-10

    def test_deterministic_signs(self, sensor100):
        _, lap, oracle = sensor100
        again = gs.eigen_oracle(lap)
        np.testing.assert_array_equal(again.U, oracle.U)
        piv = np.argmax(np.abs(oracle.U), axis=0)
        assert np.all(oracle.U[piv, np.arange(100)] > 0)
