"""Affine linear matrix inequalities and their conic standard form."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .sdp.linalg import SQRT2, svec_dim
from .sdp.program import ConicProgram, nonneg, psd


class AffineLmi:
    """Symmetric matrix map ``F(v) = F0 + sum_i v_i F_i`` of a fixed order.

    Terms are accumulated as coordinate triplets; duplicate entries add up.
    Variable index ``None`` denotes the constant term ``F0``.
    """

    def __init__(self, order: int, n_vars: int, names=None):
        if order < 1 or n_vars < 0:
            raise ValueError("order must be positive and n_vars nonnegative")
        self.order = int(order)
        self.n_vars = int(n_vars)
        self.names = list(names) if names is not None else [f"v{i}" for i in range(n_vars)]
        if len(self.names) != self.n_vars:
            raise ValueError("names must match n_vars")
        self._var, self._row, self._col, self._val = [], [], [], []

    def _push(self, var, rows, cols, vals):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.broadcast_to(np.asarray(vals, dtype=float), rows.shape).ravel()
        if rows.size and (rows.min() < 0 or cols.min() < 0
                          or rows.max() >= self.order or cols.max() >= self.order):
            raise ValueError("entry index outside the matrix")
        if var is not None and not 0 <= var < self.n_vars:
            raise ValueError(f"variable index {var} out of range")
        self._var.append(np.full(rows.size, -1 if var is None else var))
        self._row.append(rows)
        self._col.append(cols)
        self._val.append(vals.astype(float))

    def add_entry(self, var, i: int, j: int, value: float) -> None:
        """Add ``value`` at ``(i, j)`` and, off the diagonal, at ``(j, i)``."""
        if i == j:
            self._push(var, [i], [j], [value])
        else:
            self._push(var, [i, j], [j, i], [value, value])

    def add_block(self, var, r0: int, c0: int, M) -> None:
        """Add block ``M`` at offset ``(r0, c0)`` plus its mirror image.

        Diagonal blocks (``r0 == c0``) must be square and symmetric and are
        added once.
        """
        M = np.atleast_2d(np.asarray(M, dtype=float))
        p, q = M.shape
        if r0 + p > self.order or c0 + q > self.order:
            raise ValueError("block does not fit in the matrix")
        ii, jj = np.nonzero(M)
        vals = M[ii, jj]
        if r0 == c0:
            if p != q or not np.allclose(M, M.T, rtol=0, atol=1e-14 * max(1.0, np.abs(M).max())):
                raise ValueError("diagonal blocks must be symmetric")
            self._push(var, r0 + ii, c0 + jj, vals)
        else:
            self._push(var, np.concatenate([r0 + ii, c0 + jj]),
                       np.concatenate([c0 + jj, r0 + ii]), np.concatenate([vals, vals]))

    def _triplets(self):
        if not self._var:
            z = np.zeros(0, dtype=np.int64)
            return z, z, z, np.zeros(0)
        return (np.concatenate(self._var), np.concatenate(self._row),
                np.concatenate(self._col), np.concatenate(self._val))

    def evaluate(self, v) -> np.ndarray:
        """Dense ``F(v)``."""
        v = np.asarray(v, dtype=float).ravel()
        if v.size != self.n_vars:
            raise ValueError(f"expected {self.n_vars} variables, got {v.size}")
        var, r, c, val = self._triplets()
        coef = np.where(var < 0, 1.0, v[np.maximum(var, 0)] if v.size else 1.0)
        F = np.zeros((self.order, self.order))
        np.add.at(F, (r, c), coef * val)
        return F

    def svec_columns(self):
        """``(f0, F)`` with ``f0 = svec(F0)`` and column ``i`` of ``F`` equal to ``svec(F_i)``."""
        k = self.order
        var, r, c, val = self._triplets()
        low = r >= c
        r, c, var, val = r[low], c[low], var[low], val[low]
        pos = c * k - c * (c - 1) // 2 + (r - c)
        val = np.where(r == c, val, val * SQRT2)
        dim = svec_dim(k)
        const = var < 0
        f0 = np.zeros(dim)
        np.add.at(f0, pos[const], val[const])
        F = sp.coo_matrix((val[~const], (pos[~const], var[~const])),
                          shape=(dim, self.n_vars)).tocsr()
        F.sum_duplicates()
        return f0, F


def lmi_to_conic(lmi: AffineLmi, objective, nonneg_vars=None) -> ConicProgram:
    """Canonicalize ``min objective @ v  s.t.  F(v) <= 0 (NSD), v_i >= 0 for flagged i``.

    Rows are ordered: one nonnegative row per flagged variable, then a single
    PSD block holding ``-F(v)``.
    """
    c = np.asarray(objective, dtype=float).ravel()
    if c.size != lmi.n_vars:
        raise ValueError(f"objective has {c.size} entries, LMI has {lmi.n_vars} variables")
    flags = np.zeros(lmi.n_vars, dtype=bool) if nonneg_vars is None else np.asarray(nonneg_vars, dtype=bool)
    if flags.shape != (lmi.n_vars,):
        raise ValueError("nonneg flags must have one entry per variable")
    idx = np.flatnonzero(flags)
    # v_i >= 0  <=>  0 - (-e_i) v in R_+
    A_nn = sp.csr_matrix((-np.ones(idx.size), (np.arange(idx.size), idx)),
                         shape=(idx.size, lmi.n_vars))
    f0, F = lmi.svec_columns()
    # -F(v) PSD  <=>  -f0 - F v in S_+
    A = sp.vstack([A_nn, F]).tocsr()
    b = np.concatenate([np.zeros(idx.size), -f0])
    cones = ((nonneg(idx.size),) if idx.size else ()) + (psd(lmi.order),)
    return ConicProgram(c=c, A=A, b=b, cones=cones)
