"""Dense linear algebra helpers: rank-r SVD reduction, determinants, cofactors.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. ``as_matrix``
is the single entry point that validates shape and finiteness.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ResidualAboveTolerance


def as_matrix(x, name="matrix"):
    """Return ``x`` as a finite 2-D float64 array (copying only if needed)."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains NaN or Inf")
    return a


@dataclass(frozen=True)
class ReducedModel:
    """Rank-r SVD reduction ``X ~ U diag(sigma) V^T``.

    ``xtilde`` is ``V^T`` (r x N) and ``s`` its row sums. ``residual`` is the
    Frobenius norm of the discarded part, ``tail_ratio`` is sigma_{r+1}/sigma_1.
    """
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray
    xtilde: np.ndarray
    s: np.ndarray
    residual: float
    tail_ratio: float

    @property
    def rank(self):
        return self.sigma.shape[0]


def svd_reduce(X, r, rank_tol=1e-8):
    """Top-r SVD of ``X`` with a fixed sign convention.

    Each column of U is flipped so that its largest-magnitude entry is
    positive; the matching column of V is flipped with it. Raises
    ``ResidualAboveTolerance`` (carrying the model) when sigma_{r+1} exceeds
    ``rank_tol * sigma_1``.
    """
    X = as_matrix(X, "X")
    m, n = X.shape
    if not 1 <= r <= min(m, n):
        raise ValueError(f"rank r={r} outside [1, {min(m, n)}]")
    U, sv, Vt = np.linalg.svd(X, full_matrices=False)
    if sv[0] <= 0.0:
        raise ResidualAboveTolerance("X is identically zero", ratio=np.inf)
    Ur = U[:, :r].copy()
    Vr = Vt[:r, :].T.copy()
    idx = np.argmax(np.abs(Ur), axis=0)
    signs = np.sign(Ur[idx, np.arange(r)])
    signs[signs == 0] = 1.0
    Ur *= signs
    Vr *= signs
    sigma = sv[:r].copy()
    tail = sv[r:]
    residual = float(np.sqrt(np.sum(tail ** 2)))
    ratio = float(tail[0] / sv[0]) if tail.size else 0.0
    xtilde = np.ascontiguousarray(Vr.T)
    model = ReducedModel(U=Ur, sigma=sigma, V=Vr, xtilde=xtilde,
                         s=xtilde.sum(axis=1), residual=residual,
                         tail_ratio=ratio)
    if np.any(sigma <= 0.0) or ratio > rank_tol:
        raise ResidualAboveTolerance(
            f"sigma_(r+1)/sigma_1 = {ratio:.3e} exceeds rank_tol={rank_tol:.1e}",
            model=model, ratio=ratio)
    return model


def determinant(Q):
    """Determinant through LU with partial pivoting (LAPACK getrf)."""
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError(f"determinant needs a square matrix, got {Q.shape}")
    if Q.shape[0] == 0:
        return 1.0
    return float(np.linalg.det(Q))


def minor(Q, i, j):
    """``Q`` with row ``i`` and column ``j`` removed."""
    return np.delete(np.delete(Q, i, axis=0), j, axis=1)


def cofactor_vector(Q, k):
    """Cofactors of row ``k``: ``p[j] = (-1)^(k+j) det(minor(Q, k, j))``.

    By construction ``p @ Q[k] == det(Q)`` and ``p`` does not depend on the
    entries of row ``k``.
    """
    Q = np.asarray(Q, dtype=np.float64)
    r = Q.shape[0]
    if Q.shape != (r, r):
        raise ValueError(f"cofactor_vector needs a square matrix, got {Q.shape}")
    if not 0 <= k < r:
        raise IndexError(f"row index {k} outside [0, {r})")
    if r == 1:
        return np.ones(1)
    rest = np.delete(Q, k, axis=0)
    p = np.empty(r)
    for j in range(r):
        p[j] = (-1) ** (k + j) * determinant(np.delete(rest, j, axis=1))
    return p


def gram_det(W):
    """``det(W^T W)``, clamped at zero."""
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] < W.shape[1]:
        raise ValueError(f"gram_det needs a tall matrix, got {W.shape}")
    return max(determinant(W.T @ W), 0.0)
