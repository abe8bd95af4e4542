"""Dense symmetric-matrix helpers shared by the solver and the SDP builders.

PSD cone blocks are vectorized with the scaled lower-triangle convention:
entries (i, j) with i >= j, ordered column by column, off-diagonals
multiplied by sqrt(2).  With this convention ``svec(A) @ svec(B)`` equals the
Frobenius inner product ``<A, B>``.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

SQRT2 = math.sqrt(2.0)


def as_symmetric(M, name: str = "matrix", atol: float | None = None) -> np.ndarray:
    """Validate ``M`` as a finite square symmetric matrix and return a float copy.

    ``atol`` is the allowed asymmetry; by default ``1e-12 * max|M|``.
    """
    A = np.array(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    scale = float(np.max(np.abs(A))) if A.size else 0.0
    tol = 1e-12 * max(scale, 1.0) if atol is None else atol
    if np.max(np.abs(A - A.T)) > tol:
        raise ValueError(f"{name} is not symmetric")
    return (A + A.T) / 2.0


def sym(M) -> np.ndarray:
    """Symmetric part ``(M + M^T) / 2``."""
    A = np.asarray(M, dtype=float)
    return (A + A.T) / 2.0


def sym_eig(M) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix.

    Returns ``(values, vectors)`` with values ascending and orthonormal
    eigenvectors as columns, so ``M = V diag(values) V^T``.
    """
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("sym_eig: non-finite input")
    values, vectors = np.linalg.eigh(sym(A))
    return values, vectors


def project_psd(M) -> np.ndarray:
    """Nearest PSD matrix in Frobenius norm (negative eigenvalues clipped to 0)."""
    values, vectors = sym_eig(M)
    clipped = np.clip(values, 0.0, None)
    P = (vectors * clipped) @ vectors.T
    return sym(P)


def min_eig(M) -> float:
    return float(np.linalg.eigvalsh(sym(M))[0])


def max_eig(M) -> float:
    return float(np.linalg.eigvalsh(sym(M))[-1])


def svec_dim(n: int) -> int:
    return n * (n + 1) // 2


def svec_order(dim: int) -> int:
    """Inverse of :func:`svec_dim`; raises if ``dim`` is not triangular."""
    n = int(round((math.sqrt(8 * dim + 1) - 1) / 2))
    if svec_dim(n) != dim:
        raise ValueError(f"{dim} is not a triangular number")
    return n


@lru_cache(maxsize=64)
def svec_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column indices ``(i, j)``, ``i >= j``, in svec order."""
    # column-major lower triangle == row-major upper triangle of the transpose
    cols, rows = np.triu_indices(n)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


@lru_cache(maxsize=64)
def _svec_weights(n: int) -> np.ndarray:
    rows, cols = svec_indices(n)
    w = np.where(rows == cols, 1.0, SQRT2)
    w.setflags(write=False)
    return w


def svec(M) -> np.ndarray:
    A = np.asarray(M, dtype=float)
    n = A.shape[0]
    rows, cols = svec_indices(n)
    return A[rows, cols] * _svec_weights(n)


def smat(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = svec_order(v.shape[0])
    rows, cols = svec_indices(n)
    M = np.zeros((n, n))
    vals = v / _svec_weights(n)
    M[rows, cols] = vals
    M[cols, rows] = vals
    return M
