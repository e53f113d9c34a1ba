"""Sampling set selection.

The greedy methods all approximate the same step: pick the vertex whose
filtered delta adds the most volume to the span of those already chosen,
``||d_v||^2 - ||P_D d_v||^2``. They differ in how the two terms are obtained:

* ``exact_greedy_sample`` computes both exactly from an eigenbasis;
* ``sp_ideal_sample`` does the same with a band that grows by one per step;
* ``avm_sample`` estimates coherences by random projections and replaces the
  projection with a diagonal-Gram penalty built from filtered deltas;
* ``dc_sample`` replaces the projection with a geodesic distance test;
* ``wrs_sample`` drops the projection and samples at random.

Ties are always broken towards the lowest vertex index.
"""

import csv
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh

from ._rng import make_rng
from .errors import InvalidInputError, InvalidKernelError, InvalidParameterError
from .graph import geodesic_from_set
from .spectral import (
    DEFAULT_DEGREE,
    _bound,
    _matrix,
    apply_filter,
    chebyshev_fit,
    coherence_projections,
    estimate_coherence,
    exact_coherence,
    filtered_diagonal,
)

__all__ = [
    "SamplingResult",
    "GreedyState",
    "KernelSpec",
    "wrs_sample",
    "dc_sample",
    "avm_greedy",
    "avm_sample",
    "avm_sample_exact",
    "exact_greedy_sample",
    "sp_ideal_sample",
    "sp_finite_k_sample",
    "avm_kernel_sample",
    "avm_kernel_sample_exact",
    "residual_scores",
]

TIE_RTOL = 1e-10


@dataclass(eq=False)
class SamplingResult:
    vertices: np.ndarray
    scores: np.ndarray
    elapsed: float
    method: str
    params: dict = field(default_factory=dict)
    probabilities: np.ndarray = None
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.vertices)

    def metadata(self):
        meta = {"method": self.method, "params": _jsonable(self.params), "elapsed": self.elapsed,
                "n_samples": len(self.vertices)}
        diag = {k: v for k, v in self.diagnostics.items() if k != "state"}
        if diag:
            meta["diagnostics"] = _jsonable(diag)
        return meta

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "vertex", "score"])
            for i, (v, sc) in enumerate(zip(self.vertices, self.scores)):
                w.writerow([i, int(v), repr(float(sc))])

    def append_metadata(self, path):
        with open(path, "a") as fh:
            fh.write(json.dumps(self.metadata(), sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    return repr(obj)


def _argmax_lowest(values, allowed, rtol=TIE_RTOL):
    """Index of the maximum over ``allowed``; near-ties go to the lowest index."""
    idx = np.flatnonzero(allowed)
    vals = values[idx]
    best = vals.max()
    scale = np.abs(vals).max()
    return int(idx[np.flatnonzero(vals >= best - rtol * scale - 1e-300)[0]])


def _check_s(s, n, strict=False):
    if int(s) != s or s < 1 or s > n or (strict and s >= n):
        bound = "n-1" if strict else "n"
        raise InvalidParameterError(f"s must be an integer in [1, {bound}] (n={n}), got {s!r}")
    return int(s)


# --------------------------------------------------------------------------
# WRS and DC
# --------------------------------------------------------------------------


def wrs_sample(profile, s, seed=None):
    """Draw ``s`` vertices i.i.d. with probability proportional to squared coherence."""
    t0 = time.perf_counter()
    coh = np.asarray(getattr(profile, "sq_coherence", profile), dtype=float)
    if int(s) != s or s < 1:
        raise InvalidParameterError(f"s must be a positive integer, got {s!r}")
    if np.any(coh < 0) or not np.all(np.isfinite(coh)):
        raise InvalidInputError("squared coherences must be finite and nonnegative")
    total = coh.sum()
    if total <= 0:
        raise InvalidInputError("all-zero coherence profile")
    p = coh / total
    draws = make_rng(seed).choice(len(p), size=int(s), replace=True, p=p)
    return SamplingResult(draws, coh[draws], time.perf_counter() - t0, "wrs",
                          {"s": int(s)}, probabilities=p[draws],
                          diagnostics={"distribution": p})


def dc_sample(g, profile, s, delta=0.9):
    """Distance-coherence selection.

    Start from the most coherent vertex; afterwards only vertices whose
    geodesic distance to the current set exceeds ``delta`` times the largest
    such distance are eligible, and the most coherent of them is taken.
    Unreachable vertices count as farthest. When nothing is eligible the
    restriction is dropped.
    """
    t0 = time.perf_counter()
    coh = np.asarray(getattr(profile, "sq_coherence", profile), dtype=float)
    n = g.n
    s = _check_s(s, n)
    if not 0.0 <= delta <= 1.0:
        raise InvalidParameterError(f"delta must lie in [0, 1], got {delta!r}")
    free = np.ones(n, dtype=bool)
    chosen, scores, fallbacks = [], [], 0
    for m in range(s):
        if m == 0:
            cand = free
        else:
            dist = geodesic_from_set(g, chosen).dist
            far = np.isinf(dist) & free
            if far.any():
                cand = far
            else:
                cand = free & (dist > delta * dist[free].max())
            if not cand.any():
                cand = free
                fallbacks += 1
        v = _argmax_lowest(coh, cand)
        chosen.append(v)
        scores.append(coh[v])
        free[v] = False
    return SamplingResult(np.array(chosen), np.array(scores), time.perf_counter() - t0, "dc",
                          {"s": s, "delta": delta}, diagnostics={"fallbacks": fallbacks})


# --------------------------------------------------------------------------
# AVM
# --------------------------------------------------------------------------


@dataclass(eq=False)
class GreedyState:
    """Bookkeeping for the diagonal-Gram greedy step."""

    selected: list
    d_selected: list
    norms_sq: list
    running_penalty: np.ndarray


def avm_greedy(coherence, s, delta_fn, callback=None, keep_vectors=False):
    """Select ``s`` vertices maximizing ``coherence[v] - penalty[v]``.

    ``delta_fn(v)`` returns ``(y, norm_sq)``: the vector whose squared
    entries, divided by ``norm_sq``, are added to the penalty once ``v`` is
    chosen. For a projector ``y`` is the filtered delta itself.
    """
    coherence = np.asarray(coherence, dtype=float)
    n = len(coherence)
    state = GreedyState([], [], [], np.zeros(n))
    free = np.ones(n, dtype=bool)
    scores = np.empty(s)
    for m in range(s):
        score = coherence - state.running_penalty
        v = _argmax_lowest(score, free)
        scores[m] = score[v]
        y, nrm = delta_fn(v)
        free[v] = False
        state.selected.append(v)
        state.norms_sq.append(nrm)
        if keep_vectors:
            state.d_selected.append(y)
        if nrm > 0:
            state.running_penalty = state.running_penalty + y * y / nrm
        if callback is not None:
            callback(state)
    return np.array(state.selected), scores, state


def _unit(n, v):
    e = np.zeros(n)
    e[v] = 1.0
    return e


def avm_sample(lap, s, c=10.0, eps=0.1, degree=DEFAULT_DEGREE, seed=None, profile=None,
               keep_state=False, **coherence_kw):
    """Approximate volume maximization.

    Coherences and the cutoff ``lambda_s`` are estimated for a band of ``s``
    frequencies; each chosen vertex is low-pass filtered once and its squared
    response, normalized by its energy, is added to a running penalty.
    """
    t0 = time.perf_counter()
    L = _matrix(lap)
    n = L.shape[0]
    s = _check_s(s, n)
    if profile is None:
        profile = estimate_coherence(lap, s, c=c, eps=eps, degree=degree, seed=seed, **coherence_kw)
    h = profile.lowpass

    def delta_fn(v):
        d = apply_filter(L, h, _unit(n, v))
        return d, float(d @ d)

    verts, scores, state = avm_greedy(profile.sq_coherence, s, delta_fn, keep_vectors=keep_state)
    diag = {"lambda_s": profile.lambda_s, "dichotomy_iterations": profile.iterations,
            "converged": profile.converged, "n_projections": profile.n_projections}
    if keep_state:
        diag["state"] = state
    return SamplingResult(verts, scores, time.perf_counter() - t0, "avm",
                          {"s": s, "c": c, "eps": eps, "degree": degree}, diagnostics=diag)


def avm_sample_exact(oracle, s, keep_state=False, callback=None):
    """AVM with exact coherences and ideal filtered deltas from an eigenbasis."""
    t0 = time.perf_counter()
    s = _check_s(s, oracle.n)
    UR = oracle.band(s)
    coh = exact_coherence(oracle, s)

    def delta_fn(v):
        d = UR @ UR[v]
        return d, float(d @ d)

    verts, scores, state = avm_greedy(coh, s, delta_fn, callback=callback, keep_vectors=keep_state)
    diag = {"state": state} if keep_state else {}
    return SamplingResult(verts, scores, time.perf_counter() - t0, "avm_exact", {"s": s},
                          diagnostics=diag)


# --------------------------------------------------------------------------
# exact greedy and ideal SP
# --------------------------------------------------------------------------


def _row_space_basis(rows, cutoff=1e-10):
    """Orthonormal basis (columns) of the span of ``rows``; returns ``(Q, rank)``."""
    if rows.shape[0] == 0:
        return np.zeros((rows.shape[1], 0)), 0
    _, sv, Vt = np.linalg.svd(rows, full_matrices=False)
    rank = int(np.sum(sv > cutoff * sv[0])) if sv[0] > 0 else 0
    return Vt[:rank].T, rank


def residual_scores(G, selected, cutoff=1e-10):
    """``||d_v||^2 - ||P_D d_v||^2`` for every vertex.

    ``G`` holds the band ``U_R`` (orthonormal columns) so that
    ``<d_v, d_w> = G[v] . G[w]``; the projection is therefore computed in
    band coordinates. Rank deficiency of the selected rows is handled by
    discarding singular values below ``cutoff`` times the largest. The
    residual is formed explicitly rather than as a difference of norms.
    """
    Q, rank = _row_space_basis(G[list(selected)], cutoff)
    if rank == 0:
        return np.einsum("ij,ij->i", G, G), 0
    Res = G - (G @ Q) @ Q.T
    return np.einsum("ij,ij->i", Res, Res), rank


def exact_greedy_sample(oracle, s, R=None):
    """Greedy determinant maximization with exact projections for band ``R``
    (default: the first ``s`` frequencies)."""
    t0 = time.perf_counter()
    n = oracle.n
    s = _check_s(s, n)
    G = oracle.band(s if R is None else R)
    free = np.ones(n, dtype=bool)
    chosen, scores, deficient = [], [], []
    for m in range(s):
        sc, rank = residual_scores(G, chosen)
        if rank < m:
            deficient.append(m)
        v = _argmax_lowest(sc, free)
        chosen.append(v)
        scores.append(sc[v])
        free[v] = False
    R_desc = int(s) if R is None else (int(R) if np.isscalar(R) else list(map(int, R)))
    return SamplingResult(np.array(chosen), np.array(scores), time.perf_counter() - t0,
                          "exact_greedy", {"s": s, "R": R_desc},
                          diagnostics={"rank_deficient_iterations": deficient})


def sp_ideal_sample(oracle, s):
    """Limit ``k -> inf`` of spectral proxies, seen as volume maximization
    over a band ``{1..m+1}`` that grows with the iteration count ``m``."""
    t0 = time.perf_counter()
    n = oracle.n
    s = _check_s(s, n, strict=True)
    free = np.ones(n, dtype=bool)
    chosen, scores = [], []
    for m in range(s):
        sc, _ = residual_scores(oracle.band(m + 1), chosen)
        v = _argmax_lowest(sc, free)
        chosen.append(v)
        scores.append(sc[v])
        free[v] = False
    return SamplingResult(np.array(chosen), np.array(scores), time.perf_counter() - t0,
                          "sp_ideal", {"s": s})


# --------------------------------------------------------------------------
# finite-k spectral proxies
# --------------------------------------------------------------------------

_SP_DENSE_LIMIT = 800
_SP_SHIFT = -1e-12


def _smallest_eigvec(A, v0, tol, maxiter):
    """Smallest eigenpair of a symmetric PSD matrix; returns ``(vec, converged, applications)``."""
    m = A.shape[0]
    if m <= _SP_DENSE_LIMIT:
        Ad = A.toarray() if sp.issparse(A) else A
        _, V = np.linalg.eigh(Ad)
        return V[:, 0], True, 0
    try:
        _, V = eigsh(A.tocsc(), k=1, sigma=_SP_SHIFT, which="LM", v0=v0, tol=tol, maxiter=maxiter)
        return V[:, 0], True, maxiter
    except ArpackNoConvergence as exc:
        if exc.eigenvectors.shape[1]:
            return exc.eigenvectors[:, 0], False, maxiter
    except (ArpackError, RuntimeError):
        pass
    # fall back to shifted power iteration on I - A (eigenvalues of A lie in [0, 1])
    x = v0 / np.linalg.norm(v0)
    for it in range(maxiter):
        y = x - A @ x
        y /= np.linalg.norm(y)
        if np.linalg.norm(y - x) < tol:
            return y, True, it + 1
        x = y
    return x, False, maxiter


def _smallest_left_singular(B):
    """Unit vector minimizing ``||B^T x||``, i.e. the smallest eigenvector of ``B B^T``."""
    Bd = B.toarray() if sp.issparse(B) else np.asarray(B)
    U, _, _ = np.linalg.svd(Bd, full_matrices=True)
    return U[:, -1]


def sp_finite_k_sample(lap, s, k=4, tol=1e-8, max_applications=10_000, lambda_max=None):
    """Spectral-proxy sampling with a finite power ``k``.

    Each step finds the unit signal vanishing on the chosen set that
    minimizes the Rayleigh quotient of ``L^k``, i.e. the smallest eigenvector
    of the principal submatrix of ``(L / lambda_max)^k`` on the unchosen
    vertices, and takes the vertex where it is largest in magnitude. With
    nothing chosen the minimizer is the constant signal.
    """
    t0 = time.perf_counter()
    L = _matrix(lap)
    n = L.shape[0]
    s = _check_s(s, n, strict=True)
    if int(k) != k or k < 1:
        raise InvalidParameterError(f"k must be a positive integer, got {k!r}")
    Ls = sp.csr_matrix(L / _bound(lap, lambda_max))
    # for even k, L^k = H H with H = L^(k/2): the submatrix is B B^T with
    # B = H[free, :], and an SVD of B resolves far smaller eigenvalues than
    # an eigensolver applied to L^k itself
    H = sp.identity(n, format="csr")
    for _ in range(int(k) // 2):
        H = sp.csr_matrix(H @ Ls)
    Lk = sp.csr_matrix(H @ H) if k % 2 == 0 else sp.csr_matrix(H @ Ls @ H)
    half = H if k % 2 == 0 else None
    free = np.ones(n, dtype=bool)
    chosen, scores, unconverged = [], [], []
    for m in range(s):
        if m == 0:
            psi_full = np.ones(n) / math.sqrt(n)
        else:
            idx = np.flatnonzero(free)
            if half is not None and len(idx) <= _SP_DENSE_LIMIT:
                psi, ok = _smallest_left_singular(half[idx]), True
            else:
                A = Lk[idx][:, idx]
                v0 = np.ones(len(idx)) / math.sqrt(len(idx))
                psi, ok, _ = _smallest_eigvec(A, v0, tol, max_applications)
            if not ok:
                unconverged.append(m)
            psi_full = np.zeros(n)
            psi_full[idx] = psi
        mag = np.abs(psi_full)
        v = _argmax_lowest(mag, free, rtol=1e-6)
        chosen.append(v)
        scores.append(mag[v])
        free[v] = False
    return SamplingResult(np.array(chosen), np.array(scores), time.perf_counter() - t0,
                          "sp_finite_k", {"s": s, "k": int(k)},
                          diagnostics={"unconverged_iterations": unconverged,
                                       "converged": not unconverged})


# --------------------------------------------------------------------------
# generic kernels
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Kernel ``K = g(L)`` given by a scalar function positive on the spectrum."""

    g: object
    name: str = "kernel"

    def __call__(self, lam):
        return np.asarray(self.g(np.asarray(lam, dtype=float)), dtype=float) * np.ones_like(lam, dtype=float)

    def validate(self, lambda_max, n_grid=1025):
        grid = np.linspace(0.0, lambda_max, n_grid)
        vals = self(grid)
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise InvalidKernelError(f"kernel {self.name!r} is not positive on [0, {lambda_max:g}]")

    def sqrt_polynomial(self, degree, lambda_max):
        return chebyshev_fit(lambda x: np.sqrt(self(x)), degree, lambda_max)


def avm_kernel_sample(lap, s, kernel, c=10.0, degree=DEFAULT_DEGREE, seed=None,
                      distribution="bernoulli"):
    """AVM for a kernel ``g(L)``.

    ``d_v = g^{1/2}(L) delta_v`` with ``g^{1/2}`` interpolated by a Chebyshev
    polynomial; coherences ``diag g(L)`` are estimated from random probes and
    the penalty of a chosen ``w`` is ``(g^{1/2}(L) d_w)(v)^2 / ||d_w||^2``.
    """
    t0 = time.perf_counter()
    L = _matrix(lap)
    n = L.shape[0]
    s = _check_s(s, n)
    lmax = _bound(lap, None)
    kernel.validate(lmax)
    root = kernel.sqrt_polynomial(degree, lmax)
    coh = filtered_diagonal(L, root, coherence_projections(s, c), seed, distribution)

    def delta_fn(v):
        d = apply_filter(L, root, _unit(n, v))
        return apply_filter(L, root, d), float(d @ d)

    verts, scores, _ = avm_greedy(coh, s, delta_fn)
    return SamplingResult(verts, scores, time.perf_counter() - t0, "avm_kernel",
                          {"s": s, "c": c, "degree": degree, "kernel": kernel.name})


def avm_kernel_sample_exact(oracle, s, kernel):
    """Kernel AVM (diagonal-Gram approximation) evaluated with dense ``g(L)``."""
    t0 = time.perf_counter()
    s = _check_s(s, oracle.n)
    gv = kernel(oracle.evals)
    if not np.all(np.isfinite(gv)) or np.any(gv <= 0):
        raise InvalidKernelError(f"kernel {kernel.name!r} is not positive on the spectrum")
    U = oracle.U
    K = (U * gv) @ U.T
    root = (U * np.sqrt(gv)) @ U.T

    def delta_fn(v):
        d = root[:, v]
        return K[:, v], float(d @ d)

    verts, scores, _ = avm_greedy(np.diag(K).copy(), s, delta_fn)
    return SamplingResult(verts, scores, time.perf_counter() - t0, "avm_kernel_exact",
                          {"s": s, "kernel": kernel.name})
