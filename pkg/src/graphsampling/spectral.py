"""Polynomial spectral filtering on sparse Laplacians.

Everything here except :class:`EigenOracle` avoids eigendecompositions: the
ideal low-pass projector is approximated by a damped Chebyshev expansion and
applied with the three-term recurrence, spectral counts and squared
coherences are estimated with random projections.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import chebyshev as C
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh

from ._rng import make_rng
from .errors import InvalidParameterError, ParseError

__all__ = [
    "ChebyshevFilter",
    "LowPassFilter",
    "CoherenceProfile",
    "EigenOracle",
    "lambda_max_bound",
    "design_lowpass",
    "chebyshev_fit",
    "apply_filter",
    "eigencount_below",
    "estimate_coherence",
    "eigen_oracle",
    "exact_filtered_delta",
    "exact_coherence",
    "default_count_projections",
    "coherence_projections",
]

DEFAULT_DEGREE = 30
_DENSE_LIMIT = 200
_ALLPASS_GAP = 1e-4


def _matrix(lap):
    return lap.matrix if hasattr(lap, "matrix") else sp.csr_matrix(lap)


def _bound(lap, lambda_max):
    if lambda_max is not None:
        return float(lambda_max)
    if hasattr(lap, "lambda_max_bound"):
        return float(lap.lambda_max_bound)
    return lambda_max_bound(lap)


def _power_iteration(L, iters=50):
    x = make_rng(0).standard_normal(L.shape[0])
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iters):
        y = L @ x
        lam = float(x @ y)
        nrm = np.linalg.norm(y)
        if nrm == 0:
            return 0.0
        x = y / nrm
    return lam


def lambda_max_bound(lap, kind=None, safety=1.01):
    """Upper bound on the largest Laplacian eigenvalue.

    Small matrices use a dense solver, larger ones Lanczos with a fixed start
    vector (falling back to 50 power iterations). The estimate is inflated by
    ``safety`` and capped by the Gershgorin bound, which always holds.
    """
    L = _matrix(lap)
    n = L.shape[0]
    if n == 0:
        raise InvalidParameterError("empty Laplacian")
    absL = abs(L)
    gersh = float(np.asarray(absL.sum(axis=1)).max())
    if kind == "normalized":
        gersh = min(gersh, 2.0)
    if gersh == 0:
        return 1.0
    if n <= _DENSE_LIMIT:
        est = float(np.linalg.eigvalsh(L.toarray())[-1])
    else:
        try:
            v0 = make_rng(0).standard_normal(n)
            est = float(eigsh(L, k=1, which="LA", v0=v0, tol=1e-6, return_eigenvectors=False)[0])
        except (ArpackNoConvergence, ArpackError):
            est = _power_iteration(L)
    return min(safety * est, gersh) if est > 0 else gersh


@dataclass(frozen=True, eq=False)
class ChebyshevFilter:
    """Polynomial ``sum_k coeffs[k] T_k(2 lambda / lambda_max - 1)`` on ``[0, lambda_max]``."""

    coeffs: np.ndarray
    lambda_max: float

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def __call__(self, lam):
        x = 2.0 * np.asarray(lam, dtype=float) / self.lambda_max - 1.0
        return C.chebval(x, self.coeffs)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "coeff"])
            w.writerow(["lambda_max", repr(self.lambda_max)])
            for k, c in enumerate(self.coeffs):
                w.writerow([k, repr(float(c))])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        try:
            lmax = float(rows[1][1])
            coeffs = np.array([float(r[1]) for r in rows[2:]])
        except (IndexError, ValueError) as exc:
            raise ParseError(f"{path}: bad filter file ({exc})") from None
        return cls(coeffs, lmax)


@dataclass(frozen=True, eq=False)
class LowPassFilter(ChebyshevFilter):
    cutoff: float = math.inf
    damping: str = "lanczos"


def _damping_factors(degree, damping):
    k = np.arange(degree + 1)
    if damping == "lanczos":
        return np.sinc(k / (degree + 1))
    if damping == "jackson":
        a = np.pi / (degree + 2)
        return (
            (1 - k / (degree + 2)) * np.sin(a) * np.cos(k * a)
            + np.cos(a) * np.sin(k * a) / (degree + 2)
        ) / np.sin(a)
    if damping in (None, "none"):
        return np.ones(degree + 1)
    raise InvalidParameterError(f"unknown damping {damping!r}")


def design_lowpass(cutoff, degree=DEFAULT_DEGREE, lambda_max=None, damping="lanczos"):
    """Damped Chebyshev expansion of the step ``1[lambda <= cutoff]``.

    A cutoff within ``1e-4 * lambda_max`` of the top of the interval (or
    above it) yields the exact all-pass polynomial: a degree-``d`` expansion
    cannot resolve a step that close to the edge.
    """
    if lambda_max is None or not lambda_max > 0:
        raise InvalidParameterError("lambda_max must be positive")
    if not cutoff > 0:
        raise InvalidParameterError("cutoff must be positive")
    if degree < 1 or int(degree) != degree:
        raise InvalidParameterError("degree must be a positive integer")
    degree = int(degree)
    if cutoff >= lambda_max * (1.0 - _ALLPASS_GAP):
        coeffs = np.zeros(degree + 1)
        coeffs[0] = 1.0
        return LowPassFilter(coeffs, float(lambda_max), float(cutoff), damping)
    theta = math.acos(2.0 * cutoff / lambda_max - 1.0)
    k = np.arange(1, degree + 1)
    coeffs = np.concatenate([[(np.pi - theta) / np.pi], -2.0 * np.sin(k * theta) / (k * np.pi)])
    coeffs *= _damping_factors(degree, damping)
    return LowPassFilter(coeffs, float(lambda_max), float(cutoff), damping)


def chebyshev_fit(func, degree, lambda_max):
    """Chebyshev interpolant of a scalar spectral function on ``[0, lambda_max]``."""
    coeffs = C.chebinterpolate(lambda x: func((x + 1.0) * lambda_max / 2.0), int(degree))
    return ChebyshevFilter(np.asarray(coeffs, dtype=float), float(lambda_max))


def apply_filter(lap, filt, X):
    """Apply ``filt(L)`` to the columns of ``X`` with the Chebyshev recurrence."""
    L = _matrix(lap)
    X = np.asarray(X, dtype=float)
    c = filt.coeffs
    scale = 2.0 / filt.lambda_max
    out = c[0] * X
    if len(c) == 1:
        return out
    prev, cur = X, scale * (L @ X) - X
    out = out + c[1] * cur
    for ck in c[2:]:
        prev, cur = cur, 2.0 * (scale * (L @ cur) - cur) - prev
        out += ck * cur
    return out


def default_count_projections(n):
    return max(1, math.ceil(10 * math.log(max(n, 2))))


def coherence_projections(s, c):
    return max(1, math.ceil(c * s * math.log(max(s, 2))))


def _count(L, lam, Z, degree, lmax, damping):
    h = design_lowpass(lam, degree, lmax, damping)
    Y = apply_filter(L, h, Z)
    return float(np.sum(Y * Y)) / Z.shape[1]


def eigencount_below(lap, lam, n_projections=None, seed=None, degree=DEFAULT_DEGREE,
                     lambda_max=None, damping="lanczos"):
    """Estimate ``#{eigenvalues <= lam}`` as the mean of ``||h(L) z||^2`` over
    standard Gaussian ``z``."""
    L = _matrix(lap)
    n = L.shape[0]
    lmax = _bound(lap, lambda_max)
    if n_projections is None:
        n_projections = default_count_projections(n)
    Z = make_rng(seed).standard_normal((n, int(n_projections)))
    return _count(L, lam, Z, degree, lmax, damping)


@dataclass(frozen=True, eq=False)
class CoherenceProfile:
    """Estimated squared local coherences for the band ``[0, lambda_s]``."""

    sq_coherence: np.ndarray = field(repr=False)
    lambda_s: float
    n_projections: int
    converged: bool
    iterations: int = 0
    count_estimate: float = float("nan")
    lowpass: LowPassFilter = field(default=None, repr=False)

    @classmethod
    def from_values(cls, values, lambda_s=float("nan")):
        v = np.asarray(values, dtype=float)
        return cls(v, lambda_s, 0, True, 0, float(v.sum()))


def _random_block(rng, n, m, r, distribution):
    if distribution == "bernoulli":
        return (2.0 * rng.integers(0, 2, size=(n, m)) - 1.0) / math.sqrt(r)
    if distribution == "gaussian":
        return rng.standard_normal((n, m)) / math.sqrt(r)
    raise InvalidParameterError(f"unknown projection distribution {distribution!r}")


def filtered_diagonal(lap, filt, n_vectors, seed=None, distribution="bernoulli", block=256):
    """Estimate ``diag(filt(L)^2)`` from ``n_vectors`` random probes."""
    L = _matrix(lap)
    n = L.shape[0]
    rng = make_rng(seed)
    acc = np.zeros(n)
    done = 0
    while done < n_vectors:
        m = min(block, n_vectors - done)
        Y = apply_filter(L, filt, _random_block(rng, n, m, n_vectors, distribution))
        acc += np.einsum("ij,ij->i", Y, Y)
        done += m
    return acc


def estimate_coherence(lap, s, c=10.0, eps=0.1, degree=DEFAULT_DEGREE, seed=None,
                       n_projections=None, distribution="bernoulli", damping="lanczos",
                       max_iter=50, lambda_max=None):
    """Estimate the cutoff ``lambda_s`` with about ``s`` eigenvalues below it
    and the squared coherences of the corresponding low-pass band.

    The cutoff is found by bisection until the estimated eigencount lies in
    ``[s, (1 + eps) s]``. Coherences are the mean squared responses of
    ``ceil(c s log s)`` random probes, rescaled to sum to the eigencount.
    """
    L = _matrix(lap)
    n = L.shape[0]
    if s < 1 or s > n or int(s) != s:
        raise InvalidParameterError(f"s must be an integer in [1, n={n}], got {s!r}")
    lmax = _bound(lap, lambda_max)
    rng = make_rng(seed)
    if n_projections is None:
        n_projections = default_count_projections(n)
    Z = rng.standard_normal((n, int(n_projections)))

    def count(lam):
        return _count(L, lam, Z, degree, lmax, damping)

    upper = s * (1.0 + eps)
    lo, hi = 0.0, lmax
    cnt_hi = count(hi)
    lam_s, cnt, converged, it = hi, cnt_hi, True, 0
    if cnt_hi > upper:
        converged = False
        while it < max_iter:
            it += 1
            mid = 0.5 * (lo + hi)
            cm = count(mid)
            if s <= cm <= upper:
                lam_s, cnt, converged = mid, cm, True
                break
            if cm < s:
                lo = mid
            else:
                hi, cnt_hi = mid, cm
        if not converged:
            lam_s, cnt = hi, cnt_hi

    h = design_lowpass(lam_s, degree, lmax, damping)
    r = coherence_projections(s, c)
    diag = filtered_diagonal(L, h, r, rng, distribution)
    total = diag.sum()
    sq = diag * (cnt / total) if total > 0 else diag
    return CoherenceProfile(sq, float(lam_s), r, converged, it, float(cnt), h)


@dataclass(frozen=True, eq=False)
class EigenOracle:
    """Dense eigendecomposition ``L = U diag(evals) U^T``, eigenvalues ascending."""

    U: np.ndarray = field(repr=False)
    evals: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.U.shape[0]

    def band(self, R):
        """Columns of ``U`` for a frequency set: an int ``r`` means the first ``r``."""
        if np.isscalar(R):
            return self.U[:, : int(R)]
        return self.U[:, np.asarray(R, dtype=np.int64)]


def eigen_oracle(lap):
    L = _matrix(lap).toarray() if sp.issparse(_matrix(lap)) else np.asarray(lap, dtype=float)
    evals, U = np.linalg.eigh(L)
    # deterministic sign: largest-magnitude entry of each eigenvector positive
    piv = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[piv, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return EigenOracle(U * signs, evals)


def exact_filtered_delta(oracle, R, v):
    """``U_R U_R^T delta_v``."""
    UR = oracle.band(R)
    return UR @ UR[v]


def exact_coherence(oracle, R):
    """Exact squared coherences ``||U_R^T delta_v||^2`` for all vertices."""
    UR = oracle.band(R)
    return np.einsum("ij,ij->i", UR, UR)
