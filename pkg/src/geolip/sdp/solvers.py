"""Solver registry and the diag-1 SDP helper used by both primal relaxations."""
from __future__ import annotations

import math
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .ipm import solve_ipm
from .linalg import SQRT2, smat, svec, svec_indices, sym
from .program import ConeKind, ConicProgram, SdpSolution, SolverSettings, SolverStatus, psd

SolverFn = Callable[[ConicProgram, SolverSettings], SdpSolution]

_SOLVERS: dict[str, SolverFn] = {}


def register_solver(name: str, fn: SolverFn) -> None:
    _SOLVERS[name] = fn


def available_solvers() -> list[str]:
    return sorted(_SOLVERS)


def solve(prog: ConicProgram, settings: SolverSettings | None = None,
          solver: str | SolverFn = "ipm") -> SdpSolution:
    """Solve ``prog``; ``solver`` is a registered name or any callable backend."""
    settings = settings or SolverSettings()
    fn = _SOLVERS[solver] if isinstance(solver, str) else solver
    return fn(prog, settings)


def _solve_cvxopt(prog: ConicProgram, settings: SolverSettings) -> SdpSolution:
    """Adapter for cvxopt's conelp (optional dependency, used for cross-checks)."""
    import cvxopt
    from cvxopt import solvers as cvs

    A = prog.A.tocsr()
    eq, lin, blocks = [], [], []
    for cone, sl in prog.cone_slices():
        if cone.kind is ConeKind.ZERO:
            eq.append(np.arange(sl.start, sl.stop))
        elif cone.kind is ConeKind.NONNEG:
            lin.append(np.arange(sl.start, sl.stop))
        elif cone.size:
            blocks.append((cone.size, sl))
    eq = np.concatenate(eq) if eq else np.zeros(0, dtype=int)
    lin = np.concatenate(lin) if lin else np.zeros(0, dtype=int)

    # cvxopt stores PSD blocks as full column-major k*k vectors
    G_parts, h_parts = [A[lin].toarray()], [prog.b[lin]]
    for k, sl in blocks:
        rows, cols = svec_indices(k)
        T = np.zeros((k * k, rows.size))
        wt = np.where(rows == cols, 1.0, 1.0 / SQRT2)
        T[cols * k + rows, np.arange(rows.size)] = wt
        T[rows * k + cols, np.arange(rows.size)] = wt
        G_parts.append(T @ A[sl].toarray())
        h_parts.append(T @ prog.b[sl])
    G = np.vstack(G_parts)
    h = np.concatenate(h_parts)
    dims = {"l": int(lin.size), "q": [], "s": [k for k, _ in blocks]}
    opts = {"show_progress": False, "abstol": settings.eps_abs, "reltol": settings.eps_rel,
            "feastol": settings.eps_abs, "maxiters": min(settings.max_iters, 500)}
    args = [cvxopt.matrix(prog.c), cvxopt.matrix(G), cvxopt.matrix(h), dims]
    if eq.size:
        args += [cvxopt.matrix(A[eq].toarray()), cvxopt.matrix(prog.b[eq])]
    res = cvs.conelp(*args, options=opts)
    status = {
        "optimal": SolverStatus.OPTIMAL,
        "primal infeasible": SolverStatus.INFEASIBLE,
        "dual infeasible": SolverStatus.UNBOUNDED,
    }.get(res["status"], SolverStatus.MAX_ITERS)
    x = np.array(res["x"]).ravel() if res["x"] is not None else np.full(prog.n_vars, np.nan)
    y = np.zeros(prog.n_rows)
    if res["z"] is not None:
        z = np.array(res["z"]).ravel()
        y[lin] = z[: lin.size]
        off = lin.size
        for k, sl in blocks:
            y[sl] = svec(sym(z[off:off + k * k].reshape(k, k, order="F")))
            off += k * k
    if res["y"] is not None and eq.size:
        y[eq] = np.array(res["y"]).ravel()
    return SdpSolution(
        x=x, objective=float(prog.c @ x), status=status,
        primal_residual=float(res.get("primal infeasibility") or 0.0),
        dual_residual=float(res.get("dual infeasibility") or 0.0),
        gap=float(abs(res.get("gap") or 0.0)), iterations=int(res.get("iterations", 0)),
        y=y, s=prog.slack(x), dual_objective=float(-prog.b @ y), solver="cvxopt")


register_solver("ipm", solve_ipm)
register_solver("cvxopt", _solve_cvxopt)


def solve_diag_one_sdp(C, sense: str = "max", settings: SolverSettings | None = None,
                       solver: str | SolverFn = "ipm"):
    """Optimize ``tr(C X)`` over ``{X PSD, diag(X) = 1}``.

    The program is solved in its dual form ``min sum(d) s.t. Diag(d) - C PSD``
    (for ``sense="max"``); ``X`` is recovered as the PSD multiplier.  The
    returned value is the dual objective after shifting ``d`` by the smallest
    eigenvalue of ``Diag(d) - C`` when needed, so for ``"max"`` it is a
    certified upper bound on the optimum (lower bound for ``"min"``).

    Returns ``(value, X, solution)``.
    """
    if sense not in ("max", "min"):
        raise ValueError("sense must be 'max' or 'min'")
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("C must be square")
    if not np.all(np.isfinite(C)):
        raise ValueError("C has non-finite entries")
    Cs = sym(C) if sense == "max" else -sym(C)
    k = Cs.shape[0]
    rows, cols = svec_indices(k)
    diag_pos = np.flatnonzero(rows == cols)
    # b - A d = svec(Diag(d) - Cs)
    A = sp.csr_matrix((-np.ones(k), (diag_pos, np.arange(k))), shape=(rows.size, k))
    prog = ConicProgram(c=np.ones(k), A=A, b=-svec(Cs), cones=(psd(k),))
    sol = solve(prog, settings, solver)
    # the shifted dual value bounds the optimum for any finite d, so it is
    # reported even when the solver stopped early
    if np.all(np.isfinite(sol.x)):
        d = sol.x
        shift = float(np.linalg.eigvalsh(np.diag(d) - Cs)[0])
        value = float(np.sum(d) - k * min(shift, 0.0))
    else:
        value = math.nan
    X = smat(sol.y) if sol.y is not None and np.all(np.isfinite(sol.y)) else None
    if sense == "min":
        value = -value
    return value, X, sol
