"""Sparse weighted graphs: generators, point-cloud ingestion, Laplacians,
synthetic bandlimited signals and geodesic distances."""

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from ._rng import make_rng
from .errors import InvalidInputError, InvalidParameterError, ParseError

__all__ = [
    "SparseGraph",
    "Laplacian",
    "SyntheticSignal",
    "GeodesicDistanceField",
    "gen_sensor_knn",
    "gen_barabasi_albert",
    "gen_community",
    "gen_watts_strogatz",
    "gen_erdos_renyi",
    "gen_grid",
    "gen_path",
    "build_knn_graph_from_points",
    "make_graph",
    "GRAPH_MODELS",
    "laplacian",
    "gen_signal",
    "geodesic_from_set",
    "write_edge_list",
    "read_edge_list",
    "read_points_csv",
]


@dataclass(frozen=True, eq=False)
class SparseGraph:
    """Weighted undirected graph stored as a symmetric CSR adjacency matrix.

    Only strictly positive off-diagonal weights are stored. The matrix is
    validated on construction and must not be mutated afterwards.
    """

    adjacency: sp.csr_matrix

    def __post_init__(self):
        A = sp.csr_matrix(self.adjacency, dtype=np.float64)
        A.sum_duplicates()
        A.eliminate_zeros()
        A.sort_indices()
        if A.shape[0] != A.shape[1]:
            raise InvalidInputError("adjacency matrix must be square")
        if A.nnz:
            if not np.all(np.isfinite(A.data)) or A.data.min() <= 0:
                raise InvalidInputError("edge weights must be finite and strictly positive")
            if A.diagonal().any():
                raise InvalidInputError("self-loops are not allowed")
            if (A != A.T).nnz:
                raise InvalidInputError("adjacency matrix is not symmetric")
        object.__setattr__(self, "adjacency", A)

    @classmethod
    def from_edges(cls, n, rows, cols, weights=None):
        """Build from an undirected edge list (each pair listed once)."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        w = np.ones(len(rows)) if weights is None else np.asarray(weights, dtype=np.float64)
        if len(rows) and (rows.min() < 0 or cols.min() < 0 or max(rows.max(), cols.max()) >= n):
            raise InvalidInputError("edge endpoint out of range")
        if np.any(rows == cols):
            raise InvalidInputError("self-loops are not allowed")
        if len(w) != len(rows) or not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise InvalidInputError("need one finite, strictly positive weight per edge")
        A = sp.coo_matrix((w, (rows, cols)), shape=(n, n)).tocsr()
        A = A.maximum(A.T)
        return cls(A)

    @property
    def n(self):
        return self.adjacency.shape[0]

    @property
    def row_ptr(self):
        return self.adjacency.indptr

    @property
    def col_idx(self):
        return self.adjacency.indices

    @property
    def weights(self):
        return self.adjacency.data

    @property
    def n_edges(self):
        """Number of undirected edges."""
        return self.adjacency.nnz // 2

    def degrees(self, weighted=True):
        if weighted:
            return np.asarray(self.adjacency.sum(axis=1)).ravel()
        return np.diff(self.adjacency.indptr)

    def edges(self):
        """Upper-triangular edge arrays ``(i, j, w)`` with ``i < j``."""
        U = sp.triu(self.adjacency, k=1).tocoo()
        order = np.lexsort((U.col, U.row))
        return U.row[order], U.col[order], U.data[order]


@dataclass(frozen=True, eq=False)
class Laplacian:
    kind: str
    matrix: sp.csr_matrix
    lambda_max_bound: float

    @property
    def n(self):
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class SyntheticSignal:
    """Noisy bandlimited signal ``values = clean + noise``."""

    values: np.ndarray
    clean: np.ndarray
    bandwidth: int
    signal_power_target: float = 1.0
    noise_power_target: float = 0.1
    seed: object = None

    @property
    def noise(self):
        return self.values - self.clean


@dataclass(frozen=True, eq=False)
class GeodesicDistanceField:
    source_set: tuple
    dist: np.ndarray = field(repr=False)


# --------------------------------------------------------------------------
# generators
# --------------------------------------------------------------------------


def _check_count(name, value, minimum):
    if int(value) != value or value < minimum:
        raise InvalidParameterError(f"{name} must be an integer >= {minimum}, got {value!r}")


def _check_prob(name, p):
    if not (0.0 <= p <= 1.0):
        raise InvalidParameterError(f"{name} must lie in [0, 1], got {p!r}")


def _knn_adjacency(points, k):
    n = points.shape[0]
    tree = cKDTree(points)
    dist, idx = tree.query(points, k=k + 1)
    # drop self; with duplicated points self need not come first
    nbr = np.empty((n, k), dtype=np.int64)
    nd = np.empty((n, k))
    for i in range(n):
        keep = idx[i] != i
        if keep.all():
            keep[-1] = False
        nbr[i] = idx[i][keep]
        nd[i] = dist[i][keep]
    sigma = nd[:, -1].mean()
    if sigma <= 0:
        sigma = 1.0
    w = np.exp(-(nd**2) / (2 * sigma**2))
    w = np.maximum(w, np.finfo(float).tiny)
    rows = np.repeat(np.arange(n), k)
    A = sp.coo_matrix((w.ravel(), (rows, nbr.ravel())), shape=(n, n)).tocsr()
    return A.maximum(A.T)


def build_knn_graph_from_points(points, k):
    """k-nearest-neighbour graph from feature vectors (one row per point).

    Each point is joined to its ``k`` nearest Euclidean neighbours, the
    relation is symmetrised by union and edges get Gaussian kernel weights
    ``exp(-d^2 / 2 sigma^2)`` where ``sigma`` is the mean distance to the
    k-th neighbour. Coincident points get weight 1.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    if not np.all(np.isfinite(points)):
        raise InvalidInputError("point coordinates must be finite")
    _check_count("k", k, 1)
    if points.shape[0] <= k:
        raise InvalidParameterError(f"need more than k={k} points, got {points.shape[0]}")
    return SparseGraph(_knn_adjacency(points, k))


def gen_sensor_knn(n, k=8, seed=None):
    """Random sensor graph: ``n`` uniform points in the unit square, knn edges."""
    _check_count("k", k, 1)
    _check_count("n", n, 1)
    if n <= k:
        raise InvalidParameterError(f"n must exceed k (n={n}, k={k})")
    pts = make_rng(seed).random((n, 2))
    return SparseGraph(_knn_adjacency(pts, k))


def _bernoulli_pairs(rng, n, prob_of_row):
    """Sample undirected pairs i<j independently; ``prob_of_row(i)`` gives the
    probability vector for columns ``i+1..n-1``."""
    rows, cols = [], []
    for i in range(n - 1):
        p = prob_of_row(i)
        hit = np.flatnonzero(rng.random(n - i - 1) < p)
        if hit.size:
            rows.append(np.full(hit.size, i))
            cols.append(hit + i + 1)
    if not rows:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(rows), np.concatenate(cols)


def gen_erdos_renyi(n, p, seed=None):
    _check_count("n", n, 1)
    _check_prob("p", p)
    rng = make_rng(seed)
    r, c = _bernoulli_pairs(rng, n, lambda i: p)
    return SparseGraph.from_edges(n, r, c)


def gen_community(n, n_communities=5, seed=None, p_in=0.2, p_out=0.002):
    """Equal-size Erdos-Renyi blocks; leftover vertices join the last block."""
    _check_count("n", n, 1)
    _check_count("n_communities", n_communities, 1)
    if n_communities > n:
        raise InvalidParameterError("more communities than vertices")
    _check_prob("p_in", p_in)
    _check_prob("p_out", p_out)
    size = n // n_communities
    labels = np.minimum(np.arange(n) // size, n_communities - 1)
    rng = make_rng(seed)
    r, c = _bernoulli_pairs(
        rng, n, lambda i: np.where(labels[i + 1:] == labels[i], p_in, p_out)
    )
    return SparseGraph.from_edges(n, r, c)


def gen_barabasi_albert(n, m_attach=8, seed=None):
    """Preferential attachment grown from a clique on ``m_attach + 1`` vertices."""
    _check_count("m_attach", m_attach, 1)
    _check_count("n", n, 1)
    if m_attach >= n:
        raise InvalidParameterError(f"m_attach must be < n (m_attach={m_attach}, n={n})")
    rng = make_rng(seed)
    m0 = m_attach + 1
    rows, cols = [], []
    # each endpoint appears once per incident edge -> sampling is degree-proportional
    ends = []
    for i in range(min(m0, n)):
        for j in range(i + 1, min(m0, n)):
            rows.append(i)
            cols.append(j)
            ends += [i, j]
    for t in range(m0, n):
        targets = set()
        while len(targets) < m_attach:
            targets.add(ends[rng.integers(len(ends))])
        for u in sorted(targets):
            rows.append(u)
            cols.append(t)
            ends += [u, t]
    return SparseGraph.from_edges(n, rows, cols)


def gen_watts_strogatz(n, k=10, p_rewire=0.2, seed=None):
    """Ring lattice with ``k/2`` neighbours per side, each edge rewired w.p. ``p_rewire``."""
    _check_count("n", n, 1)
    _check_count("k", k, 0)
    _check_prob("p_rewire", p_rewire)
    if k % 2:
        raise InvalidParameterError(f"k must be even, got {k}")
    if k >= n:
        raise InvalidParameterError(f"k must be < n (k={k}, n={n})")
    rng = make_rng(seed)
    adj = [set() for _ in range(n)]
    for u in range(n):
        for j in range(1, k // 2 + 1):
            v = (u + j) % n
            adj[u].add(v)
            adj[v].add(u)
    for j in range(1, k // 2 + 1):
        for u in range(n):
            v = (u + j) % n
            if v not in adj[u] or rng.random() >= p_rewire:
                continue
            if len(adj[u]) >= n - 1:
                continue
            w = int(rng.integers(n))
            while w == u or w in adj[u]:
                w = int(rng.integers(n))
            adj[u].discard(v)
            adj[v].discard(u)
            adj[u].add(w)
            adj[w].add(u)
    rows = [u for u in range(n) for v in adj[u] if u < v]
    cols = [v for u in range(n) for v in adj[u] if u < v]
    return SparseGraph.from_edges(n, rows, cols)


def gen_grid(rows, cols):
    _check_count("rows", rows, 1)
    _check_count("cols", cols, 1)
    idx = np.arange(rows * cols).reshape(rows, cols)
    r = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    c = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    return SparseGraph.from_edges(rows * cols, r, c)


def gen_path(n):
    _check_count("n", n, 1)
    return SparseGraph.from_edges(n, np.arange(n - 1), np.arange(1, n))


def _grid_for(n, seed=None):
    r = int(np.sqrt(n))
    while n % r:
        r -= 1
    return gen_grid(r, n // r)


# Table I style defaults, keyed by model name.
GRAPH_MODELS = {
    "sensor_knn": (gen_sensor_knn, {"k": 8}),
    "barabasi_albert": (gen_barabasi_albert, {"m_attach": 8}),
    "community": (gen_community, {"n_communities": 5}),
    "watts_strogatz": (gen_watts_strogatz, {"k": 10, "p_rewire": 0.2}),
    "erdos_renyi": (gen_erdos_renyi, {"p": 0.02}),
    "grid": (_grid_for, {}),
    "path": (lambda n, seed=None: gen_path(n), {}),
}


def make_graph(model, n, seed=None, **params):
    """Instantiate a named graph model with its default parameters overridden by ``params``."""
    try:
        fn, defaults = GRAPH_MODELS[model]
    except KeyError:
        raise InvalidParameterError(
            f"unknown graph model {model!r}; choose from {sorted(GRAPH_MODELS)}"
        ) from None
    return fn(n, seed=seed, **{**defaults, **params})


# --------------------------------------------------------------------------
# Laplacian, signals, distances
# --------------------------------------------------------------------------


def laplacian(g, kind="combinatorial"):
    """Combinatorial ``D - A`` or symmetric normalized ``I - D^-1/2 A D^-1/2``.

    Isolated vertices get a zero row in the normalized form.
    """
    from .spectral import lambda_max_bound

    A = g.adjacency
    deg = g.degrees()
    if kind == "combinatorial":
        L = sp.diags(deg) - A
    elif kind == "normalized":
        inv = np.zeros_like(deg)
        nz = deg > 0
        inv[nz] = 1.0 / np.sqrt(deg[nz])
        Dm = sp.diags(inv)
        L = sp.diags(nz.astype(float)) - Dm @ A @ Dm
    else:
        raise InvalidParameterError(f"unknown Laplacian kind {kind!r}")
    L = sp.csr_matrix(L)
    L.sort_indices()
    return Laplacian(kind, L, lambda_max_bound(L, kind=kind))


def gen_signal(lap, f, seed=None, oracle=None, signal_power=1.0, noise_power=0.1):
    """Draw ``x = U_F c`` plus white noise.

    Coefficients are ``N(0, c1)`` with ``c1 = signal_power * n / f`` so the
    expected mean squared value of ``x`` over vertices is ``signal_power``;
    noise is ``N(0, noise_power)`` per vertex. Needs the dense eigenbasis; pass
    ``oracle`` to reuse one.
    """
    from .spectral import eigen_oracle

    n = lap.n
    _check_count("f", f, 1)
    if f > n:
        raise InvalidParameterError(f"bandwidth f={f} exceeds n={n}")
    if oracle is None:
        oracle = eigen_oracle(lap)
    rng = make_rng(seed)
    c1 = signal_power * n / f
    coef = rng.standard_normal(f) * np.sqrt(c1)
    noise = rng.standard_normal(n) * np.sqrt(noise_power)
    x = oracle.U[:, :f] @ coef
    return SyntheticSignal(x + noise, x, f, signal_power, noise_power, seed)


def _as_sources(sources, n):
    src = np.unique(np.asarray(list(sources), dtype=np.int64))
    if src.size == 0:
        raise InvalidParameterError("source set must be nonempty")
    if src.min() < 0 or src.max() >= n:
        raise InvalidParameterError("source vertex out of range")
    return src


def geodesic_from_set(g, sources):
    """Multi-source shortest path distances with edge length ``1/w``.

    Unreachable vertices get ``+inf``.
    """
    src = _as_sources(sources, g.n)
    lengths = g.adjacency.copy()
    lengths.data = 1.0 / lengths.data
    dist = dijkstra(lengths, directed=False, indices=src, min_only=True)
    return GeodesicDistanceField(tuple(int(s) for s in src), dist)


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------


def write_edge_list(g, path):
    """Header ``n m`` then one ``i j w`` line per undirected edge (0-based)."""
    i, j, w = g.edges()
    with open(path, "w") as fh:
        fh.write(f"{g.n} {len(i)}\n")
        for a, b, c in zip(i, j, w):
            fh.write(f"{a} {b} {float(c)!r}\n")


def read_edge_list(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty edge list", line=1)
    try:
        n, m = (int(t) for t in lines[0].split())
    except ValueError:
        raise ParseError("header must be 'n m'", line=1) from None
    rows, cols, ws = [], [], []
    for ln, text in enumerate(lines[1:], start=2):
        if not text.strip():
            continue
        parts = text.split()
        try:
            if len(parts) != 3:
                raise ValueError
            rows.append(int(parts[0]))
            cols.append(int(parts[1]))
            ws.append(float(parts[2]))
        except ValueError:
            raise ParseError(f"expected 'i j w', got {text!r}", line=ln) from None
    if len(rows) != m:
        raise ParseError(f"header announces {m} edges, found {len(rows)}")
    return SparseGraph.from_edges(n, rows, cols, ws)


def read_points_csv(path, has_labels=True):
    """Read one point per row. With ``has_labels`` the final column is an
    integer class label. A non-numeric first row is treated as a header.

    Returns ``(points, labels)``; ``labels`` is ``None`` without labels.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows:
        try:
            [float(t) for t in rows[0]]
        except ValueError:
            rows = rows[1:]
    if not rows:
        raise InvalidInputError(f"{path}: no data rows")
    try:
        data = np.array([[float(t) for t in r] for r in rows])
    except ValueError as exc:
        raise ParseError(f"{path}: non-numeric value ({exc})") from None
    if has_labels:
        if data.shape[1] < 2:
            raise InvalidInputError(f"{path}: expected feature columns plus a label column")
        lab = data[:, -1]
        if not np.all(np.isfinite(lab)) or np.any(lab != np.round(lab)):
            raise InvalidInputError(f"{path}: final column is not an integer label")
        return data[:, :-1], lab.astype(np.int64)
    return data, None
