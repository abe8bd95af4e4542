"""Standard-form conic programs and solver result/settings types.

A :class:`ConicProgram` is::

    minimize    c^T x
    subject to  b - A x  in  K = K_1 x K_2 x ... x K_r

where each ``K_i`` is the zero cone, the nonnegative orthant, or a PSD cone
(``svec``-vectorized, see :mod:`geolip.sdp.linalg`).  Its dual is::

    maximize    -b^T y
    subject to  A^T y + c = 0,  y in K*
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .linalg import smat, svec_dim


class ConeKind(str, enum.Enum):
    ZERO = "zero"
    NONNEG = "nonneg"
    PSD = "psd"


class Cone(NamedTuple):
    kind: ConeKind
    size: int  # rows for zero/nonneg; matrix order for psd

    @property
    def dim(self) -> int:
        return svec_dim(self.size) if self.kind is ConeKind.PSD else self.size


def zero(n: int) -> Cone:
    return Cone(ConeKind.ZERO, int(n))


def nonneg(n: int) -> Cone:
    return Cone(ConeKind.NONNEG, int(n))


def psd(n: int) -> Cone:
    return Cone(ConeKind.PSD, int(n))


@dataclass(frozen=True)
class ConicProgram:
    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    cones: tuple[Cone, ...]

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        b = np.asarray(self.b, dtype=float).ravel()
        A = sp.csr_matrix(self.A, dtype=float)
        cones = tuple(Cone(ConeKind(k), int(s)) for k, s in self.cones)
        if any(cone.size < 0 for cone in cones):
            raise ValueError("cone sizes must be nonnegative")
        rows = sum(cone.dim for cone in cones)
        if A.shape != (rows, c.shape[0]):
            raise ValueError(
                f"A has shape {A.shape}, expected ({rows}, {c.shape[0]}) from cones and c"
            )
        if b.shape[0] != rows:
            raise ValueError(f"b has length {b.shape[0]}, expected {rows}")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(b)) and np.all(np.isfinite(A.data))):
            raise ValueError("conic program data must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "cones", cones)

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    @property
    def n_rows(self) -> int:
        return self.b.shape[0]

    def cone_slices(self) -> list[tuple[Cone, slice]]:
        out, start = [], 0
        for cone in self.cones:
            out.append((cone, slice(start, start + cone.dim)))
            start += cone.dim
        return out

    def slack(self, x) -> np.ndarray:
        return self.b - self.A @ np.asarray(x, dtype=float)

    def cone_violation(self, s) -> float:
        """Largest distance-like violation of ``s in K`` (0 when inside)."""
        worst = 0.0
        for cone, sl in self.cone_slices():
            block = s[sl]
            if block.size == 0:
                continue
            if cone.kind is ConeKind.ZERO:
                worst = max(worst, float(np.max(np.abs(block))))
            elif cone.kind is ConeKind.NONNEG:
                worst = max(worst, float(np.max(-block)))
            else:
                worst = max(worst, -float(np.linalg.eigvalsh(smat(block))[0]))
        return max(worst, 0.0)


class SolverStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    MAX_ITERS = "max_iters"
    INFEASIBLE = "infeasible_detected"
    UNBOUNDED = "unbounded_detected"


@dataclass(frozen=True)
class SolverSettings:
    eps_abs: float = 1e-7
    eps_rel: float = 1e-7
    max_iters: int = 100_000
    scale: bool = True
    eps_infeas: float = 1e-8
    verbose: bool = False

    def __post_init__(self):
        if not (self.eps_abs > 0 and self.eps_rel > 0 and self.eps_infeas > 0):
            raise ValueError("solver tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class SdpSolution:
    """Solver output.  ``y`` is the dual vector (same layout as ``b``)."""

    x: np.ndarray
    objective: float
    status: SolverStatus
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    y: np.ndarray = field(default=None, repr=False)
    s: np.ndarray = field(default=None, repr=False)
    dual_objective: float = float("nan")
    solver: str = ""

    @property
    def ok(self) -> bool:
        return self.status is SolverStatus.OPTIMAL

    def summary(self) -> dict:
        return {
            "status": self.status.value,
            "iterations": int(self.iterations),
            "primal_residual": float(self.primal_residual),
            "dual_residual": float(self.dual_residual),
            "gap": float(self.gap),
        }
