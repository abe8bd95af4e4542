"""Conic programs over (zero, nonneg, PSD) cones with a self-contained solver."""
from .linalg import as_symmetric, project_psd, smat, svec, sym, sym_eig
from .program import (
    Cone,
    ConeKind,
    ConicProgram,
    SdpSolution,
    SolverSettings,
    SolverStatus,
    nonneg,
    psd,
    zero,
)
from .solvers import available_solvers, register_solver, solve, solve_diag_one_sdp

__all__ = [
    "Cone", "ConeKind", "ConicProgram", "SdpSolution", "SolverSettings", "SolverStatus",
    "as_symmetric", "available_solvers", "nonneg", "project_psd", "psd", "register_solver",
    "smat", "solve", "solve_diag_one_sdp", "svec", "sym", "sym_eig", "zero",
]
