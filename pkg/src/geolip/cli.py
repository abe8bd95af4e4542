"""Command-line interface.

Every command prints one JSON document on stdout; notes go to stderr.
Exit codes: 0 success, 2 bad flags or input file, 3 method not applicable
to the network (depth, activation, enumeration cap), 4 solver did not reach
optimality (report still printed), 5 invariant violation.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import baselines, relaxations
from .baselines import CapExceededError
from .network import (NetworkFormatError, ScalarNetwork, random_network, read_network,
                      save_network, select_output)
from .reductions import cut_norm_brute, cutnorm_to_network
from .relaxations import L2, LINF, DepthError, FglEstimate
from .sdp import SolverSettings

EXIT_OK, EXIT_USAGE, EXIT_NOT_APPLICABLE, EXIT_SOLVER, EXIT_VIOLATION = 0, 2, 3, 4, 5

METHODS = ("ngeolip", "dgeolip", "lipsdp", "mp", "brute", "sample", "round")
SOLVER_KEYS = ("status", "iterations", "primal_residual", "dual_residual", "gap")


class UsageError(Exception):
    pass


def note(msg: str) -> None:
    print(msg, file=sys.stderr)


def _finite_or_none(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _finite_or_none(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite_or_none(v) for v in x]
    return x


def emit(doc) -> None:
    print(json.dumps(_finite_or_none(doc), indent=2, allow_nan=False))


def report(est: FglEstimate, fingerprint: dict | None = None, output_index: int | None = None) -> dict:
    out = {"method": est.method, "norm": est.norm, "value": float(est.value),
           "direction": est.direction, "elapsed_ms": round(1e3 * est.elapsed, 3)}
    if est.seed is not None:
        out["seed"] = int(est.seed)
    solver = {k: est.diagnostics[k] for k in SOLVER_KEYS if k in est.diagnostics}
    details = {k: v for k, v in est.diagnostics.items() if k not in SOLVER_KEYS}
    if solver:
        out["solver"] = solver
    if est.pattern is not None:
        details["pattern"] = [np.asarray(v).tolist() for v in est.pattern]
    if details:
        out["details"] = details
    if output_index is not None:
        out["output_index"] = output_index
    if fingerprint is not None:
        out["net"] = fingerprint
    return out


def _settings(args) -> SolverSettings:
    if not args.tol > 0:
        raise UsageError("--tol must be positive")
    return SolverSettings(eps_abs=args.tol, eps_rel=args.tol)


def _load(args):
    try:
        net = read_network(args.net)
    except OSError as exc:
        raise UsageError(f"cannot read {args.net}: {exc.strerror or exc}") from None
    except NetworkFormatError as exc:
        raise UsageError(f"{args.net}: {exc}") from None
    try:
        snet = select_output(net, args.output_index)
    except IndexError as exc:
        raise UsageError(str(exc)) from None
    return net, snet


def run_method(snet: ScalarNetwork, method: str, norm: str, args) -> FglEstimate:
    """Dispatch one method; raises DepthError/CapExceededError when not applicable."""
    settings = _settings(args)
    two_layer = snet.depth == 2
    if method == "ngeolip":
        if not two_layer:
            raise DepthError("ngeolip needs a network with exactly one hidden layer")
        _require_relu(snet, method)
        fn = relaxations.ngeolip_linf if norm == LINF else relaxations.ngeolip_l2
        return fn(snet, settings)
    if method == "dgeolip":
        if norm != LINF:
            raise UsageError("dgeolip bounds the linf FGL; use lipsdp for l2")
        fn = relaxations.dgeolip_linf_2layer if two_layer else relaxations.dgeolip_linf_multilayer
        return fn(snet, settings)
    if method == "lipsdp":
        if norm != L2:
            raise UsageError("lipsdp bounds the l2 FGL; use dgeolip for linf")
        fn = relaxations.lipsdp_l2_2layer if two_layer else relaxations.lipsdp_l2_multilayer
        return fn(snet, settings)
    if method == "mp":
        return baselines.matrix_norm_product(snet, norm)
    if method == "brute":
        return baselines.brute_force_fgl(snet, norm, cap=args.brute_cap)
    if method == "sample":
        if args.samples < 1:
            raise UsageError("--samples must be >= 1")
        return baselines.sample_lower_bound(snet, norm, args.samples, args.seed)
    if method == "round":
        if not two_layer:
            raise DepthError("round needs a network with exactly one hidden layer")
        _require_relu(snet, method)
        if args.rounds < 1:
            raise UsageError("--rounds must be >= 1")
        est, _ = baselines.rounding_estimate(snet, norm, args.rounds, args.seed, settings)
        return est
    raise UsageError(f"unknown method {method!r}")


class NotApplicable(Exception):
    pass


def _require_relu(snet: ScalarNetwork, method: str):
    if snet.slopes != (0.0, 1.0):
        raise NotApplicable(f"{method} needs ReLU slope bounds (0, 1), got {snet.slopes}")


def _solver_ok(est: FglEstimate) -> bool:
    return est.diagnostics.get("status", "optimal") == "optimal"


# --------------------------------------------------------------------------
# commands


def cmd_estimate(args) -> int:
    net, snet = _load(args)
    try:
        est = run_method(snet, args.method, args.norm, args)
    except (DepthError, CapExceededError, NotApplicable) as exc:
        note(f"error: {exc}")
        return EXIT_NOT_APPLICABLE
    emit(report(est, net.fingerprint(), args.output_index))
    if not _solver_ok(est):
        note(f"solver finished with status {est.diagnostics['status']}")
        return EXIT_SOLVER
    return EXIT_OK


def _parse_dims(text: str) -> list[int]:
    try:
        dims = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"--dims must be comma-separated integers, got {text!r}") from None
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise UsageError("--dims needs at least two positive sizes")
    return dims


def cmd_gen(args) -> int:
    dims = _parse_dims(args.dims)
    if not args.scale > 0:
        raise UsageError("--scale must be positive")
    net = random_network(dims, seed=args.seed, scale=args.scale)
    data = save_network(net)
    if args.out is None:
        sys.stdout.write(data.decode("utf-8") + "\n")
        return EXIT_OK
    try:
        with open(args.out, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise UsageError(f"cannot write {args.out}: {exc.strerror or exc}") from None
    emit({"out": args.out, "seed": args.seed, "scale": args.scale, "net": net.fingerprint()})
    return EXIT_OK


def _check(checks, name, norm, lhs, rhs, ok):
    checks.append({"check": name, "norm": norm, "lhs": lhs, "rhs": rhs, "pass": bool(ok)})


def verify_estimates(ests: dict, norm: str) -> list[dict]:
    """Sandwich and duality checks over the estimates available for one norm."""
    checks = []

    def le(lo, hi):
        if lo in ests and hi in ests:
            a, b = ests[lo].value, ests[hi].value
            ok = math.isfinite(a) and math.isfinite(b) and a <= b + 1e-6 * max(1.0, abs(b))
            _check(checks, f"{lo} <= {hi}", norm, a, b, ok)

    dual = "dgeolip" if norm == LINF else "lipsdp"
    uppers = [m for m in ("ngeolip", dual, "mp") if m in ests]
    if "brute" in ests:
        le("sample", "brute")
        le("round", "brute")
        for m in uppers:
            le("brute", m)
    else:
        for lo in ("sample", "round"):
            for m in uppers:
                le(lo, m)
    if "ngeolip" in ests and dual in ests:
        a, b = ests["ngeolip"].value, ests[dual].value
        ok = math.isfinite(a) and math.isfinite(b) and abs(a - b) <= max(1e-6, 1e-3 * max(abs(a), abs(b)))
        _check(checks, f"ngeolip == {dual}", norm, a, b, ok)
    return checks


def cmd_verify(args) -> int:
    net, snet = _load(args)
    norms = [LINF, L2] if args.norm == "both" else [args.norm]
    reports, checks, solver_fail = [], [], False
    for norm in norms:
        ests = {}
        dual = "dgeolip" if norm == LINF else "lipsdp"
        for method in ("brute", "mp", "sample", "ngeolip", dual, "round"):
            try:
                ests[method] = run_method(snet, method, norm, args)
            except (DepthError, CapExceededError, NotApplicable) as exc:
                note(f"skipping {method} ({norm}): {exc}")
                continue
            if not _solver_ok(ests[method]):
                solver_fail = True
                note(f"{method} ({norm}): solver status {ests[method].diagnostics['status']}")
        reports += [report(e) for e in ests.values()]
        checks += verify_estimates(ests, norm)
    reports.sort(key=lambda r: (r["method"], r["norm"]))
    passed = all(c["pass"] for c in checks)
    for c in checks:
        if not c["pass"]:
            note(f"FAIL [{c['norm']}] {c['check']}: {c['lhs']!r} vs {c['rhs']!r}")
    result = "PASS" if passed else "FAIL"
    note(result)
    emit({"net": net.fingerprint(), "output_index": args.output_index, "reports": reports,
          "checks": checks, "result": result})
    if not passed:
        return EXIT_VIOLATION
    return EXIT_SOLVER if solver_fail else EXIT_OK


def _load_matrix(path) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            doc = json.loads(fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise UsageError(f"{path}: malformed JSON: {exc}") from None
    if (not isinstance(doc, list) or not doc or not all(isinstance(r, list) and r for r in doc)
            or len({len(r) for r in doc}) != 1):
        raise UsageError(f"{path}: expected a non-empty rectangular 2-D array")
    try:
        A = np.array(doc, dtype=float)
    except (TypeError, ValueError):
        raise UsageError(f"{path}: entries must be numbers") from None
    if not np.all(np.isfinite(A)):
        raise UsageError(f"{path}: entries must be finite")
    return A


def cmd_cutnorm(args) -> int:
    A = _load_matrix(args.matrix)
    try:
        cn = cut_norm_brute(A, cap=args.brute_cap)
        snet = cutnorm_to_network(A)
        brute = baselines.brute_force_fgl(snet, LINF, cap=args.brute_cap)
    except CapExceededError as exc:
        note(f"error: {exc}")
        return EXIT_NOT_APPLICABLE
    sdp = relaxations.ngeolip_linf(snet, _settings(args))
    equal = brute.value == 2.0 * cn
    doc = {
        "shape": list(A.shape),
        "cut_norm": cn,
        "signed_cut_norm": cut_norm_brute(A, cap=args.brute_cap, signed=True),
        "twice_cut_norm": 2.0 * cn,
        "brute_fgl": brute.value,
        "sdp_bound": sdp.value,
        "solver": {k: sdp.diagnostics[k] for k in SOLVER_KEYS},
        "equality": "PASS" if equal else "FAIL",
    }
    emit(doc)
    if not equal:
        note(f"FAIL: brute FGL {brute.value!r} != 2 * cut norm {2.0 * cn!r}")
        return EXIT_VIOLATION
    if not _solver_ok(sdp):
        return EXIT_SOLVER
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def _common(p, brute_cap=20):
    p.add_argument("--output-index", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--samples", type=int, default=200_000)
    p.add_argument("--rounds", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--brute-cap", type=int, default=brute_cap)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geolip", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="bound the FGL of a network with one method")
    p.add_argument("--net", required=True)
    p.add_argument("--norm", required=True, choices=[LINF, L2])
    p.add_argument("--method", required=True, choices=METHODS)
    _common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("gen", help="write a random network")
    p.add_argument("--dims", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("verify", help="run all applicable methods and check their ordering")
    p.add_argument("--net", required=True)
    p.add_argument("--norm", default="both", choices=[LINF, L2, "both"])
    _common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("cutnorm", help="check the cut-norm reduction on a matrix")
    p.add_argument("--matrix", required=True)
    p.add_argument("--brute-cap", type=int, default=22)
    p.add_argument("--tol", type=float, default=1e-7)
    p.set_defaults(func=cmd_cutnorm)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        note(f"error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
