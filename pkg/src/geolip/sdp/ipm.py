"""Reference conic solver: primal-dual interior point on the homogeneous embedding.

The method follows the classical Nesterov-Todd scaled, Mehrotra
predictor-corrector scheme for the cone product (nonneg x PSD) with equality
rows handled directly in the reduced KKT system.  The homogeneous
self-dual embedding gives infeasibility / unboundedness certificates for free.

Internally the program is split as::

    minimize c^T x  s.t.  A_eq x = b_eq,  G x + s = h,  s in K

and the embedding variables are ``(x, y, z, s, tau, kappa)``.
"""
from __future__ import annotations

import logging
import math

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .linalg import SQRT2, svec_indices
from .program import ConeKind, ConicProgram, SdpSolution, SolverSettings, SolverStatus

log = logging.getLogger(__name__)

_STEP = 0.99
_EXPON = 3
_MAX_NO_PROGRESS = 30
_MAX_STALLS = 5


class _NumericalFailure(Exception):
    pass


# --------------------------------------------------------------------------
# problem preparation


class _Problem:
    """Equilibrated, partitioned copy of a :class:`ConicProgram`."""

    def __init__(self, prog: ConicProgram, scale: bool):
        self.prog = prog
        A = prog.A.tocsr()
        m, n = A.shape
        row_scale = np.ones(m)
        col_scale = np.ones(n)
        if scale and A.nnz:
            row_scale, col_scale = _equilibrate(prog)
        self.row_scale = row_scale
        self.col_scale = col_scale
        As = sp.diags(row_scale) @ A @ sp.diags(col_scale)
        As = As.tocsr()
        bs = row_scale * prog.b
        self.c = col_scale * prog.c

        eq_rows, l_rows, psd_blocks = [], [], []
        for cone, sl in prog.cone_slices():
            rows = np.arange(sl.start, sl.stop)
            if cone.kind is ConeKind.ZERO:
                eq_rows.append(rows)
            elif cone.kind is ConeKind.NONNEG:
                l_rows.append(rows)
            elif cone.size > 0:
                psd_blocks.append((cone.size, rows))
        eq_rows = np.concatenate(eq_rows) if eq_rows else np.zeros(0, dtype=int)
        l_rows = np.concatenate(l_rows) if l_rows else np.zeros(0, dtype=int)
        self.eq_rows = eq_rows
        self.A = As[eq_rows]
        self.b = bs[eq_rows]
        self.l = l_rows.size
        self.psd_sizes = [k for k, _ in psd_blocks]
        ineq_rows = np.concatenate([l_rows] + [r for _, r in psd_blocks]) if (
            l_rows.size or psd_blocks) else np.zeros(0, dtype=int)
        self.ineq_rows = ineq_rows
        self.G = As[ineq_rows].tocsr()
        self.GT = self.G.T.tocsr()
        self.AT = self.A.T.tocsr()
        self.h = bs[ineq_rows]
        self.n = n
        self.p = eq_rows.size
        # offsets of each psd block inside the inequality vector
        self.psd_slices = []
        start = self.l
        for k in self.psd_sizes:
            d = k * (k + 1) // 2
            self.psd_slices.append(slice(start, start + d))
            start += d
        self.degree = self.l + sum(self.psd_sizes)
        self._block_entries = [self._entries(sl, k) for sl, k in zip(self.psd_slices, self.psd_sizes)]
        self.Gl = self.G[: self.l]

    def _entries(self, sl: slice, k: int):
        """Full symmetric (row, col, value, var) entries of the block's columns."""
        block = self.G[sl].tocoo()
        rows, cols = svec_indices(k)
        i = rows[block.row]
        j = cols[block.row]
        val = block.data
        var = block.col
        diag = i == j
        off = ~diag
        r = np.concatenate([i[diag], i[off], j[off]])
        c = np.concatenate([j[diag], j[off], i[off]])
        v = np.concatenate([val[diag], val[off] / SQRT2, val[off] / SQRT2])
        w = np.concatenate([var[diag], var[off], var[off]])
        S = sp.csr_matrix((v, (np.arange(v.size), w)), shape=(v.size, self.n))
        dense_cols = None
        cost_sparse = float(v.size) ** 2
        cost_dense = self.n * 2.0 * k ** 3 + self.n ** 2 * k ** 2
        if cost_dense < cost_sparse:
            Gm = np.zeros((self.n, k, k))
            np.add.at(Gm, (w, r, c), v)
            dense_cols = Gm
        return r, c, S, dense_cols

    # original-space views of an iterate
    def unscale(self, x, y_eq, z, s):
        m = self.prog.n_rows
        x_o = self.col_scale * x
        y = np.zeros(m)
        y[self.eq_rows] = y_eq
        y[self.ineq_rows] = z
        y_o = self.row_scale * y
        s_full = np.zeros(m)
        s_full[self.ineq_rows] = s
        s_o = s_full / self.row_scale
        return x_o, y_o, s_o


def _equilibrate(prog: ConicProgram, iters: int = 10):
    """Ruiz-style equilibration; rows of one PSD block share a single factor."""
    A = abs(prog.A.tocsr()).astype(float)
    m, n = A.shape
    groups = np.zeros(m, dtype=int)
    gid = 0
    for cone, sl in prog.cone_slices():
        if cone.kind is ConeKind.PSD:
            groups[sl] = gid
            gid += 1
        else:
            groups[sl] = gid + np.arange(sl.stop - sl.start)
            gid += sl.stop - sl.start
    D = np.ones(n)
    E = np.ones(m)
    for _ in range(iters):
        M = sp.diags(E) @ A @ sp.diags(D)
        r = np.asarray(M.max(axis=1).todense()).ravel()
        gmax = np.zeros(gid)
        np.maximum.at(gmax, groups, r)
        r = gmax[groups]
        r[r == 0] = 1.0
        E = E / np.sqrt(r)
        M = sp.diags(E) @ A @ sp.diags(D)
        cmax = np.asarray(M.max(axis=0).todense()).ravel()
        cmax[cmax == 0] = 1.0
        D = D / np.sqrt(cmax)
    return np.clip(E, 1e-4, 1e4), np.clip(D, 1e-4, 1e4)


# --------------------------------------------------------------------------
# cone algebra on the inequality part; "scaled" vectors are lists
# [nonneg vector, matrix_1, matrix_2, ...]


class _Scaling:
    """Nesterov-Todd scaling ``W`` with ``W z = W^{-T} s = lambda``."""

    def __init__(self, w, R, rti, lam_l, lam_s):
        self.w = w  # nonneg part
        self.R = R  # per psd block
        self.rti = rti  # R^{-T}
        self.lam_l = lam_l
        self.lam_s = lam_s  # eigen-like diagonal of each psd block

    def lam_sq_sum(self) -> float:
        return float(self.lam_l @ self.lam_l + sum(l @ l for l in self.lam_s))


def _nt_block(S, Z):
    L1 = np.linalg.cholesky(S)
    L2 = np.linalg.cholesky(Z)
    U, lam, Vt = np.linalg.svd(L2.T @ L1)
    if not np.all(lam > 0):
        raise _NumericalFailure("degenerate NT scaling")
    isq = 1.0 / np.sqrt(lam)
    R = (L1 @ Vt.T) * isq
    rti = (L2 @ U) * isq
    return R, rti, lam


def _nt_block_scaled(lam, Ds, Dz, alpha):
    """NT scaling of (diag(lam) + alpha Ds, diag(lam) + alpha Dz), computed stably."""
    sq = np.sqrt(lam)
    isq = 1.0 / sq
    Sh = np.eye(lam.size) + alpha * (isq[:, None] * Ds * isq[None, :])
    Zh = np.eye(lam.size) + alpha * (isq[:, None] * Dz * isq[None, :])
    L1 = sq[:, None] * np.linalg.cholesky((Sh + Sh.T) / 2)
    L2 = sq[:, None] * np.linalg.cholesky((Zh + Zh.T) / 2)
    U, lam_new, Vt = np.linalg.svd(L2.T @ L1)
    if not np.all(lam_new > 0):
        raise _NumericalFailure("degenerate NT scaling")
    isq_new = 1.0 / np.sqrt(lam_new)
    return (L1 @ Vt.T) * isq_new, (L2 @ U) * isq_new, lam_new


class _Cone:
    def __init__(self, prob: _Problem):
        self.prob = prob
        self.l = prob.l
        self.sizes = prob.psd_sizes
        self.slices = prob.psd_slices

    # flat <-> matrices
    def mats(self, v):
        from .linalg import smat

        return v[: self.l], [smat(v[sl]) for sl in self.slices]

    def flat(self, vl, mats):
        from .linalg import svec

        return np.concatenate([vl] + [svec(M) for M in mats])

    def identity(self):
        return self.flat(np.ones(self.l), [np.eye(k) for k in self.sizes])

    def min_eig(self, v) -> float:
        vl, ms = self.mats(v)
        vals = [np.min(vl)] if self.l else []
        vals += [np.linalg.eigvalsh(M)[0] for M in ms]
        return float(min(vals)) if vals else 1.0

    def scaling(self, s, z) -> _Scaling:
        sl, Ss = self.mats(s)
        zl, Zs = self.mats(z)
        w = np.sqrt(sl / zl)
        lam_l = np.sqrt(sl * zl)
        Rs, rtis, lams = [], [], []
        for S, Z in zip(Ss, Zs):
            R, rti, lam = _nt_block(S, Z)
            Rs.append(R)
            rtis.append(rti)
            lams.append(lam)
        return _Scaling(w, Rs, rtis, lam_l, lams)

    def update_scaling(self, W: _Scaling, ds, dz, alpha) -> _Scaling:
        sl = W.lam_l + alpha * ds[0]
        zl = W.lam_l + alpha * dz[0]
        w = W.w * np.sqrt(sl / zl)
        lam_l = np.sqrt(sl * zl)
        Rs, rtis, lams = [], [], []
        for R, rti, lam, Ds, Dz in zip(W.R, W.rti, W.lam_s, ds[1:], dz[1:]):
            Rt, rtit, lam_new = _nt_block_scaled(lam, Ds, Dz, alpha)
            Rs.append(R @ Rt)
            rtis.append(rti @ rtit)
            lams.append(lam_new)
        return _Scaling(w, Rs, rtis, lam_l, lams)

    # scaling maps
    def W(self, W: _Scaling, z):
        zl, Zs = self.mats(z)
        return [W.w * zl] + [R.T @ Z @ R for R, Z in zip(W.R, Zs)]

    def WiT(self, W: _Scaling, s):
        """W^{-T} s (flat -> scaled)."""
        sl, Ss = self.mats(s)
        return [sl / W.w] + [rti.T @ S @ rti for rti, S in zip(W.rti, Ss)]

    def WT(self, W: _Scaling, u):
        return self.flat(W.w * u[0], [R @ U @ R.T for R, U in zip(W.R, u[1:])])

    def Wi(self, W: _Scaling, u):
        """W^{-1} u (scaled -> flat)."""
        return self.flat(u[0] / W.w, [rti @ U @ rti.T for rti, U in zip(W.rti, u[1:])])

    @staticmethod
    def inner(u, v) -> float:
        return float(u[0] @ v[0]) + sum(float(np.sum(U * V)) for U, V in zip(u[1:], v[1:]))

    # Jordan algebra in the scaled space
    def lam(self, W: _Scaling):
        return [W.lam_l] + [np.diag(l) for l in W.lam_s]

    @staticmethod
    def prod(u, v):
        return [u[0] * v[0]] + [(U @ V + V @ U) / 2 for U, V in zip(u[1:], v[1:])]

    def lam_div(self, W: _Scaling, r):
        """Solve lambda o u = r for u."""
        out = [r[0] / W.lam_l]
        for lam, R in zip(W.lam_s, r[1:]):
            out.append(2.0 * R / (lam[:, None] + lam[None, :]))
        return out

    def max_step(self, W: _Scaling, d) -> float:
        """Largest alpha with lambda + alpha d in the cone (inf if unbounded)."""
        t = 0.0
        if self.l:
            t = max(t, float(np.max(-d[0] / W.lam_l)))
        for lam, D in zip(W.lam_s, d[1:]):
            isq = 1.0 / np.sqrt(lam)
            ev = np.linalg.eigvalsh(isq[:, None] * D * isq[None, :])
            t = max(t, -float(ev[0]))
        return math.inf if t <= 0 else 1.0 / t

    # KKT matrix H = G^T (W^T W)^{-1} G
    def hessian(self, W: _Scaling):
        prob = self.prob
        n = prob.n
        H = np.zeros((n, n))
        if self.l:
            Gl = prob.Gl
            H += (Gl.T @ sp.diags(1.0 / W.w ** 2) @ Gl).toarray()
        for (r, c, S, dense), rti in zip(prob._block_entries, W.rti):
            P = rti @ rti.T
            if dense is not None:
                T = P @ dense @ P
                H += dense.reshape(n, -1) @ T.reshape(n, -1).T
                continue
            E = r.size
            if E == 0:
                continue
            chunk = max(1, int(4e6 // E))
            for start in range(0, E, chunk):
                stop = min(E, start + chunk)
                K = P[np.ix_(r[start:stop], r)] * P[np.ix_(c[start:stop], c)]
                KS = np.asarray((S.T @ K.T).T)
                H += np.asarray(S[start:stop].T @ KS)
        return (H + H.T) / 2


# --------------------------------------------------------------------------
# linear algebra for the reduced KKT system


class _KKT:
    def __init__(self, prob: _Problem, H: np.ndarray):
        self.prob = prob
        n, p = prob.n, prob.p
        scale = max(1.0, float(np.max(np.abs(np.diag(H)))) if n else 1.0)
        self.delta = 1e-14 * scale
        K = np.zeros((n + p, n + p))
        K[:n, :n] = H
        if p:
            Ad = prob.A.toarray()
            K[n:, :n] = Ad
            K[:n, n:] = Ad.T
        self.K = K
        Kreg = K.copy()
        Kreg[np.arange(n), np.arange(n)] += self.delta
        Kreg[np.arange(n, n + p), np.arange(n, n + p)] -= self.delta
        with np.errstate(all="raise"):
            try:
                self.lu = sla.lu_factor(Kreg, check_finite=True)
            except (FloatingPointError, ValueError, np.linalg.LinAlgError) as exc:
                raise _NumericalFailure(str(exc)) from exc

    def solve(self, rhs):
        x = sla.lu_solve(self.lu, rhs)
        for _ in range(2):
            res = rhs - self.K @ x
            x = x + sla.lu_solve(self.lu, res)
        if not np.all(np.isfinite(x)):
            raise _NumericalFailure("non-finite KKT solution")
        return x


def _solve3(prob, cone, W, kkt, q1, q2, q3s):
    """Solve A^T dy + G^T dz = q1, -A dx = q2, -G dx + W^T W dz = q3.

    ``q3`` is passed pre-scaled as ``q3s = W^{-T} q3`` and ``dz`` is returned
    scaled as ``W dz``; this keeps ill-conditioned scalings out of the products.
    """
    rhs = np.concatenate([q1 - prob.GT @ cone.Wi(W, q3s), -q2])
    sol = kkt.solve(rhs)
    dx = sol[: prob.n]
    dy = sol[prob.n:]
    Gdx = cone.WiT(W, prob.G @ dx)
    dzs = [a + b for a, b in zip(q3s, Gdx)]
    return dx, dy, dzs


# --------------------------------------------------------------------------


def solve_ipm(prog: ConicProgram, settings: SolverSettings | None = None) -> SdpSolution:
    settings = settings or SolverSettings()
    prob = _Problem(prog, settings.scale)
    cone = _Cone(prob)
    n, p = prob.n, prob.p
    c, b, h = prob.c, prob.b, prob.h
    A_o, b_o, c_o = prog.A, prog.b, prog.c
    nb = float(np.max(np.abs(b_o))) if b_o.size else 0.0
    nc = float(np.max(np.abs(c_o))) if c_o.size else 0.0

    def evaluate(x, y, z, s, tau):
        xo, yo, so = prob.unscale(x, y, z, s)
        xh, yh, sh = xo / tau, yo / tau, so / tau
        Ax = A_o @ xh
        ATy = A_o.T @ yh
        pres = float(np.max(np.abs(Ax + sh - b_o))) if b_o.size else 0.0
        dres = float(np.max(np.abs(ATy + c_o))) if c_o.size else 0.0
        pcost = float(c_o @ xh)
        dcost = float(-b_o @ yh)
        gap = abs(pcost - dcost)
        tol_p = settings.eps_abs + settings.eps_rel * max(
            float(np.max(np.abs(Ax))) if Ax.size else 0.0,
            float(np.max(np.abs(sh))) if sh.size else 0.0, nb)
        tol_d = settings.eps_abs + settings.eps_rel * max(
            float(np.max(np.abs(ATy))) if ATy.size else 0.0, nc)
        tol_g = settings.eps_abs + settings.eps_rel * abs(pcost)
        return dict(x=xh, y=yh, s=sh, xo=xo, yo=yo, so=so, pres=pres, dres=dres,
                    pcost=pcost, dcost=dcost, gap=gap,
                    merit=max(pres / tol_p, dres / tol_d, gap / tol_g),
                    optimal=pres <= tol_p and dres <= tol_d and gap <= tol_g)

    def certificates(ev):
        xo, yo, so = ev["xo"], ev["yo"], ev["so"]
        bty = float(b_o @ yo)
        if bty < 0:
            r = float(np.max(np.abs(A_o.T @ yo))) if n else 0.0
            if r <= settings.eps_infeas * -bty:
                return SolverStatus.INFEASIBLE
        ctx = float(c_o @ xo)
        if ctx < 0:
            r = float(np.max(np.abs(A_o @ xo + so))) if b_o.size else 0.0
            if r <= settings.eps_infeas * -ctx:
                return SolverStatus.UNBOUNDED
        return None

    def finish(ev, status, it):
        if status is SolverStatus.INFEASIBLE:
            yo = ev["yo"]
            scale = -float(b_o @ yo)
            return SdpSolution(
                x=np.full(n, np.nan), objective=math.inf, status=status,
                primal_residual=math.inf, dual_residual=math.inf, gap=math.inf,
                iterations=it, y=yo / scale, s=None, dual_objective=math.inf, solver="ipm")
        if status is SolverStatus.UNBOUNDED:
            xo = ev["xo"]
            scale = -float(c_o @ xo)
            return SdpSolution(
                x=xo / scale, objective=-math.inf, status=status,
                primal_residual=math.inf, dual_residual=math.inf, gap=math.inf,
                iterations=it, y=None, s=ev["so"] / scale, dual_objective=-math.inf,
                solver="ipm")
        return SdpSolution(
            x=ev["x"], objective=ev["pcost"], status=status, primal_residual=ev["pres"],
            dual_residual=ev["dres"], gap=ev["gap"], iterations=it, y=ev["y"], s=ev["s"],
            dual_objective=ev["dcost"], solver="ipm")

    # ---- initial point
    ident = _Scaling(np.ones(prob.l), [np.eye(k) for k in prob.psd_sizes],
                     [np.eye(k) for k in prob.psd_sizes], np.ones(prob.l),
                     [np.ones(k) for k in prob.psd_sizes])
    try:
        kkt = _KKT(prob, cone.hessian(ident))
        x, _, zz = _solve3(prob, cone, ident, kkt, np.zeros(n), -b, cone.WiT(ident, -h))
        s = -cone.Wi(ident, zz)
        _, y, zz = _solve3(prob, cone, ident, kkt, -c, np.zeros(p),
                           cone.WiT(ident, np.zeros(h.size)))
        z = cone.Wi(ident, zz)
    except _NumericalFailure:
        x, y, s, z = np.zeros(n), np.zeros(p), cone.identity(), cone.identity()
    e = cone.identity()
    if h.size:
        ts = -cone.min_eig(s)
        if ts >= -1e-8 * max(float(np.linalg.norm(s)), 1.0):
            s = s + (1.0 + ts) * e
        tz = -cone.min_eig(z)
        if tz >= -1e-8 * max(float(np.linalg.norm(z)), 1.0):
            z = z + (1.0 + tz) * e
    tau, kappa = 1.0, 1.0
    try:
        W = cone.scaling(s, z)
    except (np.linalg.LinAlgError, _NumericalFailure):
        s, z = e.copy(), e.copy()
        W = cone.scaling(s, z)

    best = None
    stalls = 0
    it = 0
    for it in range(settings.max_iters + 1):
        ev = evaluate(x, y, z, s, tau)
        if best is None or ev["merit"] < best[0]["merit"]:
            best = (ev, it)
        if settings.verbose:
            log.info("it %3d pcost %+.9e dcost %+.9e pres %.2e dres %.2e gap %.2e tau %.2e kap %.2e",
                     it, ev["pcost"], ev["dcost"], ev["pres"], ev["dres"], ev["gap"], tau, kappa)
        if ev["optimal"]:
            return finish(ev, SolverStatus.OPTIMAL, it)
        cert = certificates(ev)
        if cert is not None:
            return finish(ev, cert, it)
        if it == settings.max_iters:
            break
        # interior-point iterates improve every step until numerical precision
        # runs out; a long run without a better iterate means no further progress
        if it - best[1] >= _MAX_NO_PROGRESS:
            log.debug("ipm stopped at iteration %d: no progress since %d", it, best[1])
            break

        try:
            rx = prob.AT @ y + prob.GT @ z + c * tau
            ry = -(prob.A @ x) + b * tau
            rz = -(prob.G @ x) + h * tau - s
            rt = -float(c @ x) - float(b @ y) - float(h @ z) - kappa
            mu = (W.lam_sq_sum() + tau * kappa) / (prob.degree + 1)

            kkt = _KKT(prob, cone.hessian(W))
            hs = cone.WiT(W, h)
            vx, vy, vzs = _solve3(prob, cone, W, kkt, c, b, hs)
            denom = float(c @ vx + b @ vy) + cone.inner(hs, vzs) + kappa / tau
            rzs = cone.WiT(W, rz)
            lam = cone.lam(W)
            lamsq = cone.prod(lam, lam)

            def newton(sigma, corr, corr_k):
                f = 1.0 - sigma
                rc = [sigma * mu * np.ones(prob.l) - lamsq[0]] + [
                    sigma * mu * np.eye(M.shape[0]) - M for M in lamsq[1:]]
                if corr is not None:
                    rc = [a - bb for a, bb in zip(rc, corr)]
                rk = sigma * mu - tau * kappa - corr_k
                lic = cone.lam_div(W, rc)
                q3s = [a - f * bb for a, bb in zip(lic, rzs)]
                ux, uy, uzs = _solve3(prob, cone, W, kkt, -f * rx, -f * ry, q3s)
                dtau = (-f * rt + rk / tau + float(c @ ux + b @ uy)
                        + cone.inner(hs, uzs)) / denom
                dx = ux - dtau * vx
                dy = uy - dtau * vy
                dzs = [a - dtau * bb for a, bb in zip(uzs, vzs)]
                dkappa = (rk - kappa * dtau) / tau
                dss = [a - bb for a, bb in zip(lic, dzs)]
                return dx, dy, dss, dzs, dtau, dkappa

            def step_len(dss, dzs, dtau, dkappa):
                amax = min(cone.max_step(W, dss), cone.max_step(W, dzs))
                if dtau < 0:
                    amax = min(amax, -tau / dtau)
                if dkappa < 0:
                    amax = min(amax, -kappa / dkappa)
                return amax

            dx, dy, dss, dzs, dtau, dkappa = newton(0.0, None, 0.0)
            alpha_aff = min(1.0, step_len(dss, dzs, dtau, dkappa))
            sigma = max(0.0, min(1.0, 1.0 - alpha_aff)) ** _EXPON
            corr = cone.prod(dss, dzs)
            dx, dy, dss, dzs, dtau, dkappa = newton(sigma, corr, dtau * dkappa)
            alpha = min(1.0, _STEP * step_len(dss, dzs, dtau, dkappa))

            Wn = cone.update_scaling(W, dss, dzs, alpha)
            ds = cone.WT(W, dss)
            dz = cone.Wi(W, dzs)
        except (np.linalg.LinAlgError, _NumericalFailure, FloatingPointError) as exc:
            log.debug("ipm stopped at iteration %d: %s", it, exc)
            break
        if not (np.isfinite(alpha) and alpha > 0):
            break
        stalls = stalls + 1 if alpha < 1e-8 else 0
        if stalls >= _MAX_STALLS:
            break
        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        s = s + alpha * ds
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkappa
        W = Wn

    ev, best_it = best
    cert = certificates(ev)
    return finish(ev, cert or SolverStatus.MAX_ITERS, it)
