"""Least-squares reconstruction of bandlimited signals from samples."""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidParameterError, RankDeficientWarning

__all__ = [
    "ReconstructionSpec",
    "reconstruct",
    "wrs_weights",
    "collapse_duplicates",
    "snr_db",
    "classify_one_vs_all",
    "reconstruction_operator",
]


@dataclass(frozen=True)
class ReconstructionSpec:
    """Bandwidth ``f`` (support ``{0..f-1}``) and least-squares flavour.

    ``weights`` are per-sample and only used when ``mode == "weighted_ls"``.
    """

    f: int
    mode: str = "plain_ls"
    weights: tuple = None
    pinv_cutoff: float = 1e-10

    def __post_init__(self):
        if self.mode not in ("plain_ls", "weighted_ls"):
            raise InvalidParameterError(f"unknown reconstruction mode {self.mode!r}")
        if int(self.f) != self.f or self.f < 1:
            raise InvalidParameterError(f"bandwidth must be a positive integer, got {self.f!r}")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if np.any(~np.isfinite(w)) or np.any(w <= 0):
                raise InvalidParameterError("weights must be strictly positive")
            object.__setattr__(self, "weights", tuple(w.tolist()))

    def with_weights(self, weights):
        return ReconstructionSpec(self.f, "weighted_ls", tuple(np.asarray(weights, float)), self.pinv_cutoff)


def reconstruction_operator(oracle, spec, S):
    """Matrix ``M`` such that ``x_hat = M @ f_S``."""
    S = np.asarray(S, dtype=np.int64)
    if S.size < 1:
        raise InvalidInputError("need at least one sample")
    if spec.f > oracle.n:
        raise InvalidParameterError(f"bandwidth f={spec.f} exceeds n={oracle.n}")
    UF = oracle.U[:, : spec.f]
    A = UF[S]
    if spec.mode == "weighted_ls":
        if spec.weights is None or len(spec.weights) != len(S):
            raise InvalidParameterError("weighted_ls needs one weight per sample")
        sw = np.sqrt(np.asarray(spec.weights))
    else:
        sw = np.ones(len(S))
    Aw = A * sw[:, None]
    pinv = np.linalg.pinv(Aw, rcond=spec.pinv_cutoff)
    rank = np.linalg.matrix_rank(Aw, tol=spec.pinv_cutoff * np.linalg.norm(Aw, 2)) if Aw.size else 0
    if rank < spec.f:
        warnings.warn(
            f"U_SF has rank {rank} < f={spec.f}; using the minimum-norm solution",
            RankDeficientWarning,
            stacklevel=3,
        )
    return UF @ (pinv * sw[None, :])


def reconstruct(oracle, spec, S, f_S):
    """``x_hat = U_F (W^1/2 U_SF)^+ W^1/2 f_S`` with ``W`` identity or ``diag(weights)``.

    ``f_S`` may be a vector or a matrix with one column per signal.
    """
    f_S = np.asarray(f_S, dtype=float)
    if f_S.shape[0] != len(S):
        raise InvalidInputError("one observed value per sample is required")
    return reconstruction_operator(oracle, spec, S) @ f_S


def wrs_weights(probabilities):
    """Weights ``1 / (s p_v)`` for weighted least squares after random sampling."""
    p = np.asarray(probabilities, dtype=float)
    if p.size == 0 or np.any(~np.isfinite(p)) or np.any(p <= 0):
        raise InvalidParameterError("sampling probabilities must be strictly positive")
    return 1.0 / (len(p) * p)


def collapse_duplicates(S, values, weights=None):
    """Merge repeated vertices into single rows whose weights add up.

    Weighted least squares on the result equals least squares over the
    original rows (repeated samples carry the same value).
    """
    S = np.asarray(S, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    w = np.ones(len(S)) if weights is None else np.asarray(weights, dtype=float)
    uniq, first, inv = np.unique(S, return_index=True, return_inverse=True)
    merged = np.zeros(len(uniq))
    np.add.at(merged, inv, w)
    return uniq, values[first], merged


def snr_db(reference, estimate):
    """``10 log10(||f||^2 / ||f_hat - f||^2)``; ``+inf`` for a perfect estimate."""
    f = np.asarray(reference, dtype=float)
    fh = np.asarray(estimate, dtype=float)
    if f.shape != fh.shape:
        raise InvalidInputError("reference and estimate must have equal shapes")
    ref = float(f @ f) if f.ndim == 1 else float(np.sum(f * f))
    if ref == 0:
        raise InvalidInputError("reference signal is zero")
    err = float(np.sum((fh - f) ** 2))
    if err == 0:
        return float("inf")
    return 10.0 * np.log10(ref / err)


def classify_one_vs_all(oracle, spec, S, label_signals):
    """Reconstruct each 0/1 class indicator from its samples and label every
    vertex with the class of largest reconstructed magnitude (lowest index on ties).

    ``label_signals`` is ``n x C``; only rows in ``S`` are read.
    """
    Y = np.asarray(label_signals, dtype=float)
    if Y.ndim != 2 or Y.shape[1] < 2:
        raise InvalidInputError("label_signals must be n x C with C >= 2")
    S = np.asarray(S, dtype=np.int64)
    rec = reconstruct(oracle, spec, S, Y[S])
    return np.argmax(np.abs(rec), axis=1)
