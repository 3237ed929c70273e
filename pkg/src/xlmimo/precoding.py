"""Zero-forcing precoding and the SINR / achievable-rate computations.

The ZF precoder for a full-rank channel matrix A (columns = scheduled users)
is f_k = A (A^H A)^{-1} e_k / sqrt([(A^H A)^{-1}]_{kk}); it nulls inter-user
interference, leaving user k an effective channel gain of
1 / [(A^H A)^{-1}]_{kk}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .errors import RankDeficient

# Columns are treated as dependent when the smallest Cholesky pivot of the
# *unit-diagonal* (norm-equalized) Gram falls below this fraction of the
# largest. Pivots scale like square roots of eigenvalues, so this bounds the
# normalized condition number near 1e14; anything tighter drowns in float64
# noise and misses exactly singular matrices.
RANK_TOLERANCE = 1e-7


def _as_matrix(matrix) -> np.ndarray:
    a = np.asarray(matrix, dtype=complex)
    if a.ndim != 2:
        raise ValueError("expected a 2-D array of channel columns")
    return a


def _normalize_gram(gram: np.ndarray):
    """(unit-diagonal Gram, column squared norms). Scaling first makes the
    rank test measure collinearity rather than norm disparity (channel norms
    span many orders of magnitude across a cell)."""
    norms_sq = np.real(np.diag(gram)).copy()
    if np.any(norms_sq <= 0.0):
        raise RankDeficient("zero channel column")
    scale = 1.0 / np.sqrt(norms_sq)
    return gram * np.outer(scale, scale), norms_sq


def _cholesky_gram(gram: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of a Gram matrix, with a pivot-ratio rank check."""
    try:
        low = cholesky(gram, lower=True)
    except np.linalg.LinAlgError as exc:
        raise RankDeficient("channel columns are linearly dependent") from exc
    pivots = np.real(np.diag(low))
    if pivots.min() < RANK_TOLERANCE * pivots.max():
        raise RankDeficient(
            f"Gram pivot ratio {pivots.min() / pivots.max():.3e} below {RANK_TOLERANCE:.0e}")
    return low


def gram_inv_diag_from_gram(gram: np.ndarray) -> np.ndarray:
    """diag(G^{-1}) for a Hermitian positive-definite Gram matrix G."""
    n = gram.shape[0]
    if n == 0:
        return np.zeros(0)
    unit_gram, norms_sq = _normalize_gram(gram)
    low = _cholesky_gram(unit_gram)
    inv_low = solve_triangular(low, np.eye(n, dtype=complex), lower=True)
    return np.sum(np.abs(inv_low) ** 2, axis=0) / norms_sq


def gram_inverse_diag(matrix) -> np.ndarray:
    """diag((A^H A)^{-1}) for channel columns A.

    Raises RankDeficient when the columns are numerically dependent (or there
    are more columns than rows); such a user set must not be scheduled
    together.
    """
    a = _as_matrix(matrix)
    m, n = a.shape
    if n > m:
        raise RankDeficient(f"{n} columns cannot be independent over {m} rows")
    return gram_inv_diag_from_gram(a.conj().T @ a)


@dataclass
class PrecodingSet:
    """Unit-norm precoding vectors, one column per scheduled user."""

    vectors: np.ndarray = field(repr=False)   # (M, |K|) complex

    @property
    def num_users(self) -> int:
        return self.vectors.shape[1]


def zf_precoder(matrix) -> PrecodingSet:
    """Zero-forcing precoders for the given channel columns.

    Column k is A (A^H A)^{-1} e_k normalized to unit length; the result
    satisfies a_i^H f_j = 0 for i != j and a_k^H f_k real positive.
    """
    a = _as_matrix(matrix)
    n = a.shape[1]
    if n == 0:
        return PrecodingSet(vectors=np.zeros((a.shape[0], 0), dtype=complex))
    unit_gram, norms_sq = _normalize_gram(a.conj().T @ a)
    low = _cholesky_gram(unit_gram)
    inv_low = solve_triangular(low, np.eye(n, dtype=complex), lower=True)
    scale = 1.0 / np.sqrt(norms_sq)
    inv_gram = (inv_low.conj().T @ inv_low) * np.outer(scale, scale)
    diag = np.real(np.diag(inv_gram))
    vectors = (a @ inv_gram) / np.sqrt(diag)
    return PrecodingSet(vectors=vectors)


class ChannelMatrix:
    """Channel vectors of a scheduled set (one column per user) with the
    Gram-inverse diagonal cached at construction.

    Construction fails with RankDeficient when the set cannot be served by
    zero-forcing (more users than antennas, or dependent columns).
    """

    def __init__(self, matrix):
        a = _as_matrix(matrix)
        m, n = a.shape
        if n > m:
            raise RankDeficient(f"{n} users cannot be full rank over {m} antennas")
        self.matrix = a
        self.gram_inv_diag = gram_inverse_diag(a)

    @property
    def num_antennas(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_users(self) -> int:
        return self.matrix.shape[1]

    def column_deleted(self, k: int) -> np.ndarray:
        """All columns except user k's (the interference subspace of user k)."""
        return np.delete(self.matrix, k, axis=1)


def zf_sinr(power, gram_inv_diag_k, noise_power: float):
    """Post-ZF SINR: p_k / (sigma_w^2 [(A^H A)^{-1}]_{kk}). Vectorizes."""
    return np.asarray(power, dtype=float) / (noise_power * np.asarray(gram_inv_diag_k, dtype=float))


def general_sinr(k: int, powers, matrix, precoders: PrecodingSet,
                 noise_power: float) -> float:
    """SINR of user k under arbitrary unit-norm precoders:
    p_k |a_k^H f_k|^2 / (sum_{i != k} p_i |a_k^H f_i|^2 + sigma_w^2).

    With ZF precoders this equals zf_sinr; it is kept as the independent
    cross-check of that reduction.
    """
    a = _as_matrix(matrix)
    p = np.asarray(powers, dtype=float)
    gains = np.abs(a[:, k].conj() @ precoders.vectors) ** 2
    signal = p[k] * gains[k]
    interference = float(p @ gains) - float(signal)
    return float(signal / (interference + noise_power))


def achievable_rate(sinr):
    """Shannon rate log2(1 + SINR) in bps/Hz. Vectorizes.

    Computed via log1p so vanishing SINRs still map to strictly positive
    rates instead of rounding to zero.
    """
    return np.log1p(np.asarray(sinr, dtype=float)) / np.log(2.0)
