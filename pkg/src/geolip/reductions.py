"""Cut-norm instances as two-layer FGL instances.

For a matrix ``A`` (m x n) the network has input dimension ``m + 1``, ``n``
ReLU units with incoming weights ``B^T`` where ``B = [A; 1^T A]``, and an
all-ones output row.  Its l_inf FGL is ``max_y ||B y||_1`` over ``y in
{0,1}^n``, which equals ``2 * max_{x, y} |<A x, y>|`` over 0-1 vectors.
"""
from __future__ import annotations

import numpy as np

from .baselines import CapExceededError
from .network import ScalarNetwork, scalar_from_weights


def _as_matrix(A) -> np.ndarray:
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.size == 0:
        raise ValueError(f"expected a non-empty matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def cutnorm_to_network(A) -> ScalarNetwork:
    """Two-layer ReLU network whose l_inf FGL is twice the cut norm of ``A``."""
    A = _as_matrix(A)
    B = np.vstack([A, A.sum(axis=0, keepdims=True)])
    return scalar_from_weights([B.T], np.ones(A.shape[1]))


def _one_sided(A: np.ndarray) -> float:
    # for fixed x the best y keeps exactly the positive entries of A x;
    # enumerate the shorter side
    if A.shape[1] > A.shape[0]:
        A = A.T
    n = A.shape[1]
    masks = np.arange(1 << n, dtype=np.int64)
    X = ((masks[:, None] >> np.arange(n)) & 1).astype(float)
    return float(np.clip(X @ A.T, 0.0, None).sum(axis=1).max())


def cut_norm_brute(A, cap: int = 22, signed: bool = False) -> float:
    """Exact cut norm by enumeration over 0-1 vectors.

    By default this is ``max |<A x, y>|`` over ``x in {0,1}^n, y in {0,1}^m``.
    With ``signed=True`` the absolute value is dropped, so e.g. ``[[-1]]``
    gives 0.
    """
    A = _as_matrix(A)
    m, n = A.shape
    if m + n > cap:
        raise CapExceededError(f"matrix of size {m}x{n} exceeds the enumeration cap {cap}")
    value = _one_sided(A)
    if not signed:
        value = max(value, _one_sided(-A))
    return value
