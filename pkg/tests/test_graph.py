"""Graph construction, Laplacians, synthetic signals, distances and file IO."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import graphsampling as gs
from graphsampling.errors import InvalidInputError, InvalidParameterError, ParseError

from oracles import dense_adjacency, dense_laplacian, floyd_warshall


def assert_valid_graph(g):
    A = g.adjacency
    assert (A != A.T).nnz == 0
    assert not A.diagonal().any()
    assert np.all(g.weights > 0)
    assert len(g.row_ptr) == g.n + 1


class TestSparseGraph:
    def test_from_edges_symmetric(self):
        g = gs.SparseGraph.from_edges(3, [0, 1], [1, 2], [2.0, 0.5])
        W = dense_adjacency(g)
        np.testing.assert_array_equal(W, [[0, 2, 0], [2, 0, 0.5], [0, 0.5, 0]])
        assert g.n_edges == 2

    def test_rejects_self_loop(self):
        with pytest.raises(InvalidInputError):
            gs.SparseGraph.from_edges(3, [0], [0])

    def test_rejects_asymmetric(self):
        import scipy.sparse as sp

        with pytest.raises(InvalidInputError):
            gs.SparseGraph(sp.csr_matrix(np.array([[0, 1.0], [0, 0]])))

    def test_rejects_negative_weight(self):
        with pytest.raises(InvalidInputError):
            gs.SparseGraph.from_edges(2, [0], [1], [-1.0])

    def test_edges_sorted_upper(self):
        g = gs.gen_grid(2, 2)
        i, j, _ = g.edges()
        assert np.all(i < j)
        assert list(zip(i, j)) == sorted(zip(i, j))


class TestGenerators:
    def test_sensor_three_points_complete(self):
        g = gs.gen_sensor_knn(3, 2, seed=0)
        assert g.n_edges == 3

    def test_sensor_too_small(self):
        with pytest.raises(InvalidParameterError):
            gs.gen_sensor_knn(2, 2, seed=0)

    def test_sensor_min_degree(self):
        g = gs.gen_sensor_knn(500, 8, seed=3)
        assert g.degrees(weighted=False).min() >= 8

    def test_erdos_renyi_complete(self):
        g = gs.gen_erdos_renyi(4, 1.0, seed=0)
        assert g.n_edges == 6

    def test_erdos_renyi_edge_count(self):
        n, p = 1000, 0.02
        g = gs.gen_erdos_renyi(n, p, seed=9)
        pairs = n * (n - 1) / 2
        mean, sd = pairs * p, np.sqrt(pairs * p * (1 - p))
        assert abs(g.n_edges - mean) <= 4 * sd

    def test_watts_strogatz_ring(self):
        g = gs.gen_watts_strogatz(10, 4, 0.0, seed=0)
        np.testing.assert_array_equal(g.degrees(weighted=False), 4)

    def test_watts_strogatz_odd_k(self):
        with pytest.raises(InvalidParameterError):
            gs.gen_watts_strogatz(10, 3, 0.1, seed=0)

    def test_barabasi_albert_edges(self):
        n, m = 200, 4
        g = gs.gen_barabasi_albert(n, m, seed=1)
        assert g.n_edges == m * (m + 1) // 2 + (n - m - 1) * m
        assert g.degrees(weighted=False).min() >= m

    def test_community_blocks(self):
        g = gs.gen_community(200, 4, seed=2, p_in=0.5, p_out=0.0)
        i, j, _ = g.edges()
        assert np.all(i // 50 == j // 50)

    @pytest.mark.parametrize("p", [-0.1, 1.5])
    def test_bad_probability(self, p):
        with pytest.raises(InvalidParameterError):
            gs.gen_erdos_renyi(10, p)

    def test_make_graph_unknown(self):
        with pytest.raises(InvalidParameterError):
            gs.make_graph("nope", 10)

    def test_grid_shape(self):
        g = gs.make_graph("grid", 1000)
        assert g.n == 1000
        assert g.n_edges == 25 * 39 + 24 * 40

    def test_seed_determinism(self):
        a = gs.gen_sensor_knn(50, 5, seed=(3, 4))
        b = gs.gen_sensor_knn(50, 5, seed=(3, 4))
        assert (a.adjacency != b.adjacency).nnz == 0

    @settings(max_examples=1000, deadline=None)
    @given(
        model=st.sampled_from(["sensor_knn", "barabasi_albert", "community", "watts_strogatz", "erdos_renyi"]),
        n=st.integers(12, 40),
        seed=st.integers(0, 2**32 - 1),
    )
    def test_invariants_random_seeds(self, model, n, seed):
        params = {"sensor_knn": {"k": 4}, "barabasi_albert": {"m_attach": 3},
                  "community": {"n_communities": 3}, "watts_strogatz": {"k": 4}, "erdos_renyi": {"p": 0.2}}
        g = gs.make_graph(model, n, seed=seed, **params[model])
        assert g.n == n
        assert_valid_graph(g)


class TestKnnFromPoints:
    def test_collinear_path(self):
        g = gs.build_knn_graph_from_points(np.array([[0.0], [1.0], [2.0]]), 1)
        W = dense_adjacency(g)
        assert (W > 0).sum() == 4
        assert W[0, 2] == 0

    def test_duplicates_weight_one(self):
        pts = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        g = gs.build_knn_graph_from_points(pts, 1)
        assert dense_adjacency(g)[0, 1] == 1.0

    def test_nan_rejected(self):
        with pytest.raises(InvalidInputError):
            gs.build_knn_graph_from_points(np.array([[0.0], [np.nan], [1.0]]), 1)

    def test_min_degree(self, rng):
        g = gs.build_knn_graph_from_points(rng.standard_normal((1000, 16)), 10)
        assert g.degrees(weighted=False).min() >= 10


class TestLaplacian:
    def test_p3_combinatorial(self, p3):
        L = gs.laplacian(p3).matrix.toarray()
        np.testing.assert_array_equal(L, [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])

    def test_row_sums_zero(self):
        g = gs.gen_sensor_knn(200, 6, seed=4)
        L = gs.laplacian(g).matrix
        rs = np.abs(np.asarray(L.sum(axis=1)).ravel())
        assert rs.max() <= 1e-12 * g.degrees().max()

    def test_k4_normalized(self):
        g = gs.gen_erdos_renyi(4, 1.0, seed=0)
        ev = np.linalg.eigvalsh(gs.laplacian(g, "normalized").matrix.toarray())
        np.testing.assert_allclose(ev, [0, 4 / 3, 4 / 3, 4 / 3], atol=1e-12)

    def test_matches_dense(self):
        g = gs.gen_barabasi_albert(60, 3, seed=8)
        for kind in ("combinatorial", "normalized"):
            np.testing.assert_allclose(gs.laplacian(g, kind).matrix.toarray(),
                                       dense_laplacian(dense_adjacency(g), kind), atol=1e-14)

    def test_quadratic_form(self, rng):
        g = gs.gen_sensor_knn(150, 6, seed=6)
        L = gs.laplacian(g).matrix
        i, j, w = g.edges()
        for _ in range(5):
            x = rng.standard_normal(g.n)
            expect = np.sum(w * (x[i] - x[j]) ** 2)
            assert abs(x @ (L @ x) - expect) <= 1e-10 * expect

    @pytest.mark.parametrize("model", ["sensor_knn", "community", "watts_strogatz"])
    def test_spectrum_ranges(self, model):
        g = gs.make_graph(model, 60, seed=1, **({"k": 4} if model != "community" else {}))
        ev = np.linalg.eigvalsh(gs.laplacian(g).matrix.toarray())
        assert ev.min() >= -1e-10
        evn = np.linalg.eigvalsh(gs.laplacian(g, "normalized").matrix.toarray())
        assert evn.min() >= -1e-10 and evn.max() <= 2 + 1e-10

    def test_isolated_vertex_normalized(self):
        g = gs.SparseGraph.from_edges(3, [0], [1])
        L = gs.laplacian(g, "normalized").matrix.toarray()
        np.testing.assert_array_equal(L[2], 0)

    def test_unknown_kind(self, p3):
        with pytest.raises(InvalidParameterError):
            gs.laplacian(p3, "random_walk")


class TestSignal:
    def test_full_band_power(self):
        lap = gs.laplacian(gs.gen_sensor_knn(200, 6, seed=2))
        oracle = gs.eigen_oracle(lap)
        powers = [np.mean(gs.gen_signal(lap, 200, seed=s, oracle=oracle, noise_power=0.0).values ** 2)
                  for s in range(200)]
        assert abs(np.mean(powers) - 1.0) < 0.05

    def test_power_targets(self):
        lap = gs.laplacian(gs.gen_sensor_knn(1000, 8, seed=2))
        oracle = gs.eigen_oracle(lap)
        sig, noi = [], []
        for s in range(100):
            x = gs.gen_signal(lap, 50, seed=s, oracle=oracle)
            sig.append(np.mean(x.clean ** 2))
            noi.append(np.mean(x.noise ** 2))
        assert abs(np.mean(sig) - 1.0) <= 0.2
        assert abs(np.mean(noi) - 0.1) <= 0.02

    def test_coefficient_variance(self):
        n, f = 100, 10
        lap = gs.laplacian(gs.gen_sensor_knn(n, 6, seed=3))
        oracle = gs.eigen_oracle(lap)
        C = np.array([oracle.U.T @ gs.gen_signal(lap, f, seed=s, oracle=oracle).clean for s in range(500)])
        var = C.var(axis=0)
        c1 = n / f
        assert np.all(np.abs(var[:f] - c1) <= 0.3 * c1)
        assert np.all(var[f:] <= 1e-20)

    def test_deterministic(self, sensor100):
        _, lap, oracle = sensor100
        a = gs.gen_signal(lap, 10, seed=42, oracle=oracle)
        b = gs.gen_signal(lap, 10, seed=42, oracle=oracle)
        assert np.array_equal(a.values, b.values)

    def test_bandwidth_too_large(self, p3):
        with pytest.raises(InvalidParameterError):
            gs.gen_signal(gs.laplacian(p3), 4)


class TestGeodesic:
    def test_path(self, p3):
        np.testing.assert_array_equal(gs.geodesic_from_set(p3, [0]).dist, [0, 1, 2])

    def test_disconnected(self):
        g = gs.SparseGraph.from_edges(4, [0, 2], [1, 3])
        d = gs.geodesic_from_set(g, [0]).dist
        assert d[1] == 1 and np.all(np.isinf(d[2:]))

    def test_weighted_triangle(self):
        g = gs.SparseGraph.from_edges(3, [0, 1, 0], [1, 2, 2], [2.0, 1.0, 1.0])
        assert gs.geodesic_from_set(g, [0]).dist[1] == 0.5

    def test_empty_sources(self, p3):
        with pytest.raises(InvalidParameterError):
            gs.geodesic_from_set(p3, [])

    @pytest.mark.parametrize("seed", range(5))
    def test_against_floyd_warshall(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(10, 51))
        g = gs.gen_erdos_renyi(n, 0.1, seed=seed)
        i, j, _ = g.edges()
        g = gs.SparseGraph.from_edges(n, i, j, rng.uniform(0.1, 3.0, len(i)))
        D = floyd_warshall(dense_adjacency(g))
        src = rng.choice(n, size=3, replace=False)
        got = gs.geodesic_from_set(g, src).dist
        np.testing.assert_allclose(got, D[src].min(axis=0), rtol=1e-12)
        fin = np.isfinite(D)
        a, b, c = rng.integers(n, size=(3, 200))
        ok = fin[a, b] & fin[b, c]
        assert np.all(D[a, c][ok] <= D[a, b][ok] + D[b, c][ok] + 1e-12)


class TestIO:
    def test_edge_list_roundtrip(self, tmp_path):
        g = gs.gen_sensor_knn(40, 4, seed=1)
        path = tmp_path / "g.txt"
        gs.write_edge_list(g, path)
        h = gs.read_edge_list(path)
        assert (g.adjacency != h.adjacency).nnz == 0

    def test_edge_list_bad_line(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("3 2\n0 1 1.0\n1 two 1.0\n")
        with pytest.raises(ParseError, match="line 3"):
            gs.read_edge_list(path)

    def test_points_csv(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("x,y,label\n0,0,1\n1,0,0\n0.5,1,1\n")
        pts, lab = gs.read_points_csv(path)
        assert pts.shape == (3, 2)
        np.testing.assert_array_equal(lab, [1, 0, 1])

    def test_points_csv_bad_label(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("0,0,1.5\n1,0,0\n")
        with pytest.raises(InvalidInputError):
            gs.read_points_csv(path)
