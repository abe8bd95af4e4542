"""SDP upper bounds on the formal global Lipschitz constant.

Primal relaxations work on two-layer ReLU networks through the matrix
``A = W^T diag(u)``: the FGL for ``l_inf`` perturbations is
``max_{y in {0,1}^n} ||A y||_1`` and for ``l_2`` it is the same with the
Euclidean norm.  Both become diag-1 SDPs after mapping the 0-1 cube onto the
+-1 cube with one extra homogenizing coordinate (see :class:`CubeLift`).

Dual programs are LMIs in the multipliers of the per-neuron slope
constraints and accept general slope bounds ``[a, b]``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .lmi import AffineLmi, lmi_to_conic
from .network import ScalarNetwork
from .sdp import SolverSettings, solve, solve_diag_one_sdp
from .sdp.linalg import sym

LINF = "linf"
L2 = "l2"
NORMS = (LINF, L2)

UPPER, LOWER, EXACT = "upper", "lower", "exact"


def check_norm(norm: str) -> str:
    if norm not in NORMS:
        raise ValueError(f"norm must be one of {NORMS}, got {norm!r}")
    return norm


def dual_exponent(norm: str) -> int:
    """Norm applied to gradients: 1 for l_inf inputs, 2 for l_2 inputs."""
    return 1 if check_norm(norm) == LINF else 2


class DepthError(ValueError):
    """Raised when a method is applied to a network of unsupported depth."""


@dataclass
class FglEstimate:
    """A bound on the FGL produced by one method."""

    value: float
    direction: str
    method: str
    norm: str
    diagnostics: dict = field(default_factory=dict)
    elapsed: float = 0.0
    seed: int | None = None
    # not serialized: argmax pattern for exact/lower methods, Gram matrix for primal SDPs
    pattern: list | None = field(default=None, repr=False)
    gram: np.ndarray | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        status = self.diagnostics.get("status")
        return status in (None, "optimal") and math.isfinite(self.value)


# --------------------------------------------------------------------------
# two-layer primal relaxations


def _require_depth(snet: ScalarNetwork, depth: int | None = None, min_depth: int = 2):
    d = snet.depth
    if depth is not None and d != depth:
        raise DepthError(f"method needs a {depth}-layer network, got {d} layers")
    if d < min_depth:
        raise DepthError(f"method needs at least {min_depth} layers, got {d}")


def _require_relu(snet: ScalarNetwork):
    if snet.slopes != (0.0, 1.0):
        raise ValueError(f"primal relaxations need ReLU slope bounds (0, 1), got {snet.slopes}")


def build_matrix_A(snet: ScalarNetwork) -> np.ndarray:
    """``W^T diag(u)`` for a network with one hidden layer (shape inputs x hidden)."""
    _require_depth(snet, depth=2)
    W = snet.hidden_weights[0]
    return W.T * snet.u


@dataclass(frozen=True)
class CubeLift:
    """Bookkeeping for ``y = (t + tau) / 2``, ``t, tau in {-1, 1}``.

    Lifted variable order is ``(t_1..t_n, tau)`` followed, for ``l_inf``, by
    the output signs ``s_1..s_m``.
    """

    A: np.ndarray
    norm: str

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2:
            raise ValueError("A must be a matrix")
        check_norm(self.norm)
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def lifted(self) -> np.ndarray:
        """``[A, A e]`` for l_inf; ``[A, A e]^T [A, A e]`` for l_2."""
        B = np.hstack([self.A, self.A.sum(axis=1, keepdims=True)])
        return B if self.norm == LINF else B.T @ B

    @property
    def dim(self) -> int:
        """Order of the diag-1 SDP."""
        return self.n + 1 + (self.m if self.norm == LINF else 0)

    def cost(self) -> np.ndarray:
        """Symmetric cost ``C`` with ``z^T C z`` the lifted objective on +-1 vectors."""
        if self.norm == L2:
            return self.lifted.copy()
        n1 = self.n + 1
        C = np.zeros((self.dim, self.dim))
        C[n1:, :n1] = self.lifted
        return sym(C)

    def value_from_sdp(self, opt: float) -> float:
        """Map a lifted optimum back to the FGL scale."""
        if self.norm == LINF:
            return 0.5 * opt
        if opt < -1e-9 * max(1.0, float(np.abs(self.lifted).max(initial=0.0))):
            raise ArithmeticError(f"negative optimum {opt} for a PSD cost")
        return 0.5 * math.sqrt(max(opt, 0.0))

    def cube_point(self, z) -> np.ndarray:
        """0-1 point encoded by a +-1 lifted vector (signs flipped so ``tau = +1``)."""
        z = np.asarray(z, dtype=float)
        t = z[: self.n] * z[self.n]
        return (t + 1.0) / 2.0

    def lift_point(self, y) -> np.ndarray:
        """+-1 encoding of ``y``, with output signs matching ``A y`` for l_inf."""
        y = np.asarray(y, dtype=float)
        z = np.concatenate([2.0 * y - 1.0, [1.0]])
        if self.norm == LINF:
            z = np.concatenate([z, np.where(self.A @ y >= 0, 1.0, -1.0)])
        return z

    def cube_objective(self, y) -> float:
        """``||A y||_q`` at a 0-1 point."""
        return float(np.linalg.norm(self.A @ np.asarray(y, dtype=float), dual_exponent(self.norm)))


def _primal(snet: ScalarNetwork, norm: str, settings, method: str) -> FglEstimate:
    start = time.perf_counter()
    _require_relu(snet)
    lift = CubeLift(build_matrix_A(snet), norm)
    opt, X, sol = solve_diag_one_sdp(lift.cost(), "max", settings)
    value = lift.value_from_sdp(opt) if math.isfinite(opt) else math.nan
    return FglEstimate(value=value, direction=UPPER, method=method, norm=norm,
                       diagnostics=sol.summary(), elapsed=time.perf_counter() - start, gram=X)


def ngeolip_linf(snet: ScalarNetwork, settings: SolverSettings | None = None) -> FglEstimate:
    """Diag-1 SDP bound on the l_inf FGL of a two-layer ReLU network."""
    return _primal(snet, LINF, settings, "ngeolip")


def ngeolip_l2(snet: ScalarNetwork, settings: SolverSettings | None = None) -> FglEstimate:
    """Diag-1 SDP bound on the l_2 FGL of a two-layer ReLU network."""
    return _primal(snet, L2, settings, "ngeolip")


# --------------------------------------------------------------------------
# dual LMI programs


def _slope_terms(snet: ScalarNetwork):
    a, b = snet.slopes
    return -2.0 * a * b, a + b


def _neuron_terms(lmi: AffineLmi, var: int, p0: int, w: np.ndarray, c: int, ab2: float, apb: float):
    """One hidden unit's slope constraint, weighted by multiplier ``var``.

    ``p0`` is the offset of the unit's input block, ``w`` its weight row and
    ``c`` the row/column of the unit itself.
    """
    if ab2 != 0.0:
        lmi.add_block(var, p0, p0, ab2 * np.outer(w, w))
    lmi.add_block(var, p0, c, apb * w.reshape(-1, 1))
    lmi.add_entry(var, c, c, -2.0)


def dual_linf_2layer_lmi(snet: ScalarNetwork):
    """LMI for the two-layer l_inf dual.

    Variables ``(zeta, lambda_1..lambda_n, tau_1..tau_m)``; matrix blocks
    ordered ``(1, x, h)``.  Returns ``(lmi, objective, nonneg_flags)``.
    """
    _require_depth(snet, depth=2)
    W, u = snet.hidden_weights[0], snet.u
    n, m = W.shape
    ab2, apb = _slope_terms(snet)
    k = 1 + m + n
    lmi = AffineLmi(k, 1 + n + m, ["zeta"] + [f"lambda{i}" for i in range(n)]
                    + [f"tau{j}" for j in range(m)])
    lmi.add_entry(0, 0, 0, -1.0)
    lmi.add_block(None, 0, 1 + m, u.reshape(1, -1))
    x0, h0 = 1, 1 + m
    for i in range(n):
        _neuron_terms(lmi, 1 + i, x0, W[i], h0 + i, ab2, apb)
    for j in range(m):
        var = 1 + n + j
        lmi.add_entry(var, 0, 0, 1.0)
        lmi.add_entry(var, x0 + j, x0 + j, -1.0)
    c = np.zeros(lmi.n_vars)
    c[0] = 0.5
    flags = np.ones(lmi.n_vars, dtype=bool)
    flags[0] = False
    return lmi, c, flags


def _layer_offsets(snet: ScalarNetwork, lead: int):
    sizes = [snet.input_dim] + snet.hidden_sizes
    offs = np.concatenate([[lead], lead + np.cumsum(sizes)])
    return sizes, [int(o) for o in offs]


def dual_linf_multilayer_lmi(snet: ScalarNetwork):
    """LMI for the l_inf dual of a network of any depth >= 2.

    Matrix blocks ``(1, x, h_1, ..., h_{d-1})``; variables ``zeta``, the box
    multipliers of the inputs, then one multiplier per hidden unit in layer
    order.
    """
    _require_depth(snet)
    sizes, offs = _layer_offsets(snet, 1)
    ab2, apb = _slope_terms(snet)
    m, n_hidden = sizes[0], sum(sizes[1:])
    names = (["zeta"] + [f"box{j}" for j in range(m)]
             + [f"layer{l + 1}_{i}" for l, s in enumerate(sizes[1:]) for i in range(s)])
    lmi = AffineLmi(offs[-1], 1 + m + n_hidden, names)
    lmi.add_entry(0, 0, 0, -1.0)
    for j in range(m):
        lmi.add_entry(1 + j, 0, 0, 1.0)
        lmi.add_entry(1 + j, offs[0] + j, offs[0] + j, -1.0)
    var = 1 + m
    for l, W in enumerate(snet.hidden_weights):
        for i in range(W.shape[0]):
            _neuron_terms(lmi, var, offs[l], W[i], offs[l + 1] + i, ab2, apb)
            var += 1
    lmi.add_block(None, 0, offs[-2], snet.u.reshape(1, -1))
    c = np.zeros(lmi.n_vars)
    c[0] = 0.5
    flags = np.ones(lmi.n_vars, dtype=bool)
    flags[0] = False
    return lmi, c, flags


def lipsdp_2layer_lmi(snet: ScalarNetwork):
    """LMI for the two-layer l_2 program; variables ``(zeta, lambda_1..lambda_n)``, blocks ``(x, h)``."""
    _require_depth(snet, depth=2)
    W, u = snet.hidden_weights[0], snet.u
    n, m = W.shape
    ab2, apb = _slope_terms(snet)
    lmi = AffineLmi(m + n, 1 + n, ["zeta"] + [f"lambda{i}" for i in range(n)])
    lmi.add_block(0, 0, 0, -np.eye(m))
    lmi.add_block(None, m, m, np.outer(u, u))
    for i in range(n):
        _neuron_terms(lmi, 1 + i, 0, W[i], m + i, ab2, apb)
    c = np.zeros(lmi.n_vars)
    c[0] = 1.0
    flags = np.ones(lmi.n_vars, dtype=bool)
    flags[0] = False
    return lmi, c, flags


def lipsdp_multilayer_lmi(snet: ScalarNetwork):
    """LMI for the l_2 program of any depth; blocks ``(x, h_1, ..., h_{d-1})``."""
    _require_depth(snet)
    sizes, offs = _layer_offsets(snet, 0)
    ab2, apb = _slope_terms(snet)
    n_hidden = sum(sizes[1:])
    names = ["zeta"] + [f"layer{l + 1}_{i}" for l, s in enumerate(sizes[1:]) for i in range(s)]
    lmi = AffineLmi(offs[-1], 1 + n_hidden, names)
    lmi.add_block(0, 0, 0, -np.eye(sizes[0]))
    lmi.add_block(None, offs[-2], offs[-2], np.outer(snet.u, snet.u))
    var = 1
    for l, W in enumerate(snet.hidden_weights):
        for i in range(W.shape[0]):
            _neuron_terms(lmi, var, offs[l], W[i], offs[l + 1] + i, ab2, apb)
            var += 1
    c = np.zeros(lmi.n_vars)
    c[0] = 1.0
    flags = np.ones(lmi.n_vars, dtype=bool)
    flags[0] = False
    return lmi, c, flags


def _dual(builder, snet, settings, method: str, norm: str) -> FglEstimate:
    start = time.perf_counter()
    lmi, c, flags = builder(snet)
    sol = solve(lmi_to_conic(lmi, c, flags), settings)
    # the FGL is nonnegative, so tiny negative optima from solver error are clipped
    if not math.isfinite(sol.objective):
        value = math.nan
    elif norm == LINF:
        value = max(sol.objective, 0.0)
    else:
        value = math.sqrt(max(sol.objective, 0.0))
    return FglEstimate(value=float(value), direction=UPPER, method=method, norm=norm,
                       diagnostics=sol.summary(), elapsed=time.perf_counter() - start)


def dgeolip_linf_2layer(snet: ScalarNetwork, settings: SolverSettings | None = None) -> FglEstimate:
    return _dual(dual_linf_2layer_lmi, snet, settings, "dgeolip", LINF)


def dgeolip_linf_multilayer(snet: ScalarNetwork, settings: SolverSettings | None = None) -> FglEstimate:
    return _dual(dual_linf_multilayer_lmi, snet, settings, "dgeolip", LINF)


def lipsdp_l2_2layer(snet: ScalarNetwork, settings: SolverSettings | None = None) -> FglEstimate:
    return _dual(lipsdp_2layer_lmi, snet, settings, "lipsdp", L2)


def lipsdp_l2_multilayer(snet: ScalarNetwork, settings: SolverSettings | None = None) -> FglEstimate:
    return _dual(lipsdp_multilayer_lmi, snet, settings, "lipsdp", L2)
