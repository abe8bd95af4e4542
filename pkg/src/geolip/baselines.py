"""Reference methods: norm product, exhaustive search, sampling and rounding."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .network import ScalarNetwork, gradient_for_pattern, pattern_at
from .relaxations import (EXACT, LINF, LOWER, UPPER, CubeLift, FglEstimate, build_matrix_A,
                          check_norm, dual_exponent)
from .sdp.linalg import sym_eig


_MAX_CANDIDATES = 64


class CapExceededError(ValueError):
    """Raised when an enumeration would exceed its configured size cap."""


def spectral_norm(W) -> float:
    """Largest singular value from the eigenvalues of the smaller Gram matrix."""
    W = np.asarray(W, dtype=float)
    G = W.T @ W if W.shape[0] >= W.shape[1] else W @ W.T
    return float(np.sqrt(max(sym_eig(G)[0][-1], 0.0)))


def matrix_norm_product(snet: ScalarNetwork, norm: str) -> FglEstimate:
    """Layerwise product of operator norms (upper bound)."""
    start = time.perf_counter()
    check_norm(norm)
    a, b = snet.slopes
    slope = max(abs(a), abs(b)) ** len(snet.hidden_sizes)
    if norm == LINF:
        # ||W||_{inf->inf} is the largest absolute row sum
        factors = [np.abs(W).sum(axis=1).max() for W in snet.hidden_weights]
        head = np.abs(snet.u).sum()
    else:
        factors = [spectral_norm(W) for W in snet.hidden_weights]
        head = np.linalg.norm(snet.u)
    value = float(head * np.prod(factors) * slope)
    return FglEstimate(value=value, direction=UPPER, method="mp", norm=norm,
                       elapsed=time.perf_counter() - start)


def _split(bits: np.ndarray, sizes) -> list[np.ndarray]:
    return np.split(bits, np.cumsum(sizes)[:-1], axis=-1)


def pattern_value(snet: ScalarNetwork, pattern, q: int) -> float:
    """``||gradient_for_pattern||_q`` for one pattern, evaluated unbatched.

    Exact and lower-bound methods report values through this function so that
    the same pattern always yields the same float.
    """
    return float(np.linalg.norm(gradient_for_pattern(snet, pattern), q))


def brute_force_fgl(snet: ScalarNetwork, norm: str, cap: int = 20,
                    chunk: int = 1 << 14) -> FglEstimate:
    """Exact FGL by enumerating every vertex activation pattern.

    Patterns are bitmasks over all hidden units (layer 1 first, low bit =
    first unit); bit 1 selects the upper slope.  Patterns are scored in
    batches; those within rounding distance of the best are rescored with
    :func:`pattern_value` and ties keep the smallest mask.
    """
    start = time.perf_counter()
    q = dual_exponent(norm)
    sizes = snet.hidden_sizes
    total = sum(sizes)
    if total > cap:
        raise CapExceededError(f"{total} hidden units exceed the brute-force cap {cap}")
    a, b = snet.slopes
    shifts = np.arange(total, dtype=np.int64)

    def pattern_of(mask):
        return _split(a + (b - a) * ((mask >> shifts) & 1).astype(float), sizes)

    rel = 1e-12
    top, candidates = -np.inf, []
    n_patterns = 1 << total
    for lo in range(0, n_patterns, chunk):
        masks = np.arange(lo, min(lo + chunk, n_patterns), dtype=np.int64)
        bits = ((masks[:, None] >> shifts) & 1).astype(float)
        slopes = a + (b - a) * bits
        norms = np.linalg.norm(gradient_for_pattern(snet, _split(slopes, sizes)), q, axis=1)
        top = max(top, float(norms.max()))
        cut = top - rel * abs(top)
        keep = norms >= cut
        merged = [(v, m) for v, m in candidates if v >= cut]
        merged += list(zip(norms[keep].tolist(), masks[keep].tolist()))
        # equal scores come from equal gradients (e.g. units with zero output
        # weight); keep the smallest mask per score and a bounded list
        merged.sort(key=lambda t: (-t[0], t[1]))
        candidates, seen = [], set()
        for v, m in merged:
            if v not in seen:
                seen.add(v)
                candidates.append((v, m))
        candidates = candidates[:_MAX_CANDIDATES]
    best, best_mask = max((pattern_value(snet, pattern_of(m), q), -m) for _, m in candidates)
    best_mask = -best_mask
    return FglEstimate(value=best, direction=EXACT, method="brute", norm=norm,
                       diagnostics={"patterns": n_patterns},
                       elapsed=time.perf_counter() - start, pattern=pattern_of(best_mask))


def sample_lower_bound(snet: ScalarNetwork, norm: str, n_samples: int = 200_000,
                       seed: int = 0, box=None, batch: int = 8192) -> FglEstimate:
    """Largest gradient norm over uniform samples from an input box.

    ``box`` is ``(lower, upper)`` (scalars or per-coordinate arrays); the
    default is the unit cube.  Samples are drawn in batches of ``batch`` rows
    from one PCG64 stream.
    """
    start = time.perf_counter()
    q = dual_exponent(norm)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    m = snet.input_dim
    lo, hi = (0.0, 1.0) if box is None else box
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (m,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (m,))
    if np.any(hi < lo) or not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("invalid sampling box")
    rng = np.random.Generator(np.random.PCG64(seed))
    best, best_x = -1.0, None
    done = 0
    while done < n_samples:
        k = min(batch, n_samples - done)
        X = lo + (hi - lo) * rng.random((k, m))
        norms = np.linalg.norm(gradient_for_pattern(snet, pattern_at(snet, X)), q, axis=1)
        i = int(np.argmax(norms))
        if norms[i] > best:
            best, best_x = float(norms[i]), X[i]
        done += k
    pattern = pattern_at(snet, best_x)
    return FglEstimate(value=pattern_value(snet, pattern, q), direction=LOWER, method="sample",
                       norm=norm, diagnostics={"samples": int(n_samples),
                                               "box": [lo.tolist(), hi.tolist()],
                                               "argmax_x": best_x.tolist()},
                       elapsed=time.perf_counter() - start, seed=seed, pattern=pattern)


@dataclass
class RoundingOutcome:
    value: float
    pattern: list
    rounds: int
    seed: int


def gram_factor(X) -> np.ndarray:
    """``V`` with ``X = V^T V`` (columns are the Gram vectors); negative eigenvalues dropped."""
    values, vectors = sym_eig(X)
    return (vectors * np.sqrt(np.clip(values, 0.0, None))).T


def round_hyperplane(X, snet: ScalarNetwork, norm: str, n_rounds: int = 1000, seed: int = 0,
                     diag_tol: float = 1e-5) -> RoundingOutcome:
    """Random-hyperplane rounding of a primal diag-1 SDP solution.

    Round ``r`` uses row ``r`` of one ``(n_rounds, k)`` standard normal draw,
    so a larger ``n_rounds`` extends the same sequence of hyperplanes.
    """
    lift = CubeLift(build_matrix_A(snet), norm)
    X = np.asarray(X, dtype=float)
    if X.shape != (lift.dim, lift.dim):
        raise ValueError(f"X has shape {X.shape}, lifted program has order {lift.dim}")
    if np.max(np.abs(np.diag(X) - 1.0)) > diag_tol:
        raise ValueError("X is not unit-diagonal within tolerance")
    if n_rounds < 1:
        raise ValueError("n_rounds must be >= 1")
    V = gram_factor(X)
    rng = np.random.Generator(np.random.PCG64(seed))
    G = rng.standard_normal((n_rounds, V.shape[0]))
    S = np.where(G @ V >= 0, 1.0, -1.0)
    Y = np.array([lift.cube_point(z) for z in S])
    # score each distinct rounded point once, in order of first appearance
    _, first = np.unique(Y, axis=0, return_index=True)
    q = dual_exponent(norm)
    value, neg_i = max((pattern_value(snet, [Y[i]], q), -i) for i in sorted(first))
    return RoundingOutcome(value=value, pattern=[Y[-neg_i]], rounds=n_rounds, seed=seed)


def rounding_estimate(snet: ScalarNetwork, norm: str, n_rounds: int = 1000, seed: int = 0,
                      settings=None) -> tuple[FglEstimate, FglEstimate]:
    """Solve the matching primal SDP, then round it.  Returns ``(lower, primal)``."""
    from .relaxations import ngeolip_l2, ngeolip_linf

    start = time.perf_counter()
    primal = (ngeolip_linf if norm == LINF else ngeolip_l2)(snet, settings)
    if primal.gram is None:
        raise ArithmeticError("primal solve returned no solution matrix")
    out = round_hyperplane(primal.gram, snet, norm, n_rounds, seed)
    est = FglEstimate(value=out.value, direction=LOWER, method="round", norm=norm,
                      diagnostics=dict(primal.diagnostics, rounds=n_rounds),
                      elapsed=time.perf_counter() - start, seed=seed, pattern=out.pattern)
    return est, primal
