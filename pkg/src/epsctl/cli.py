"""Command-line front end.

Exit codes: 0 success, 2 input/parse error, 3 structural or stability
failure, 4 solver failure, 5 containment violation under ``--strict``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._parallel import ENV_VAR
from .epsnorm import alpha_sweep, eps_alpha_norm, eps_norm
from .errors import EpsCtlError, SchemaError, StructuralError
from .simkit import (
    RNG_NAME,
    DisturbanceKind,
    DisturbanceSpec,
    containment_stats,
    ellipsoid_boundary_points,
    gen_disturbance,
    simulate,
    simulate_runs,
)
from .solvers import solve_p_alpha
from .sysfile import bundled_path, load_system, parse_system, reference_table
from .synthesis import (
    OBSERVER,
    OUTPUT_FEEDBACK,
    STATE_FEEDBACK,
    optimize_synthesis,
    synthesize,
)
from .sysmodel import LtiSystem, spectral_radius

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_STRUCTURAL = 3
EXIT_SOLVER = 4
EXIT_CONTAINMENT = 5

MODE_KIND = {
    STATE_FEEDBACK: "state_feedback",
    OBSERVER: "filter",
    OUTPUT_FEEDBACK: "output_feedback",
}
KIND_MODE = {v: k for k, v in MODE_KIND.items()}
FIXTURES = {
    "paper-siv": "paper_siv.json",
    "scalar-lti": "scalar_lti.json",
    "scalar-state-feedback": "scalar_state_feedback.json",
    "reference-table": "table1_reference.json",
}


class Failure(Exception):
    """Command-level failure carrying an exit code."""

    def __init__(self, code, kind, message):
        super().__init__(message)
        self.code = code
        self.kind = kind


# --------------------------------------------------------------------------
# output helpers


def fmt(x):
    return format(float(x), ".17g")


def write_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _tolist(M):
    return None if M is None else np.asarray(M).tolist()


def _realization(S):
    return {"A": _tolist(S.A), "B": _tolist(S.B), "C": _tolist(S.C), "D": _tolist(S.D)}


def _emit(key, value):
    if isinstance(value, bool):
        value = str(value).lower()
    elif isinstance(value, float):
        value = fmt(value)
    elif isinstance(value, (list, tuple)):
        value = json.dumps(value)
    print(f"{key}={value}")


def _report(args, digest, results, started, seed=None, files=None):
    return {
        "command": list(args.argv),
        "input_digest": f"sha256:{digest}",
        "version": __version__,
        "rng": RNG_NAME,
        "seed": seed,
        "results": results,
        "files": files or {},
        "duration_s": time.perf_counter() - started,
    }


def _write_report(path, report):
    if path:
        write_atomic(path, json.dumps(report, indent=2) + "\n")


def _load(path):
    try:
        return load_system(path)
    except OSError as exc:
        raise Failure(EXIT_PARSE, "IOError", f"cannot read {path}: {exc.strerror}") from None


def _sweep_arg(text):
    try:
        lo, hi, pts = text.split(":")
        return float(lo), float(hi), int(pts)
    except ValueError:
        raise argparse.ArgumentTypeError("expected lo:hi:points") from None


def _plane_arg(text):
    try:
        i, j = text.split(",")
        return int(i) - 1, int(j) - 1
    except ValueError:
        raise argparse.ArgumentTypeError("expected two 1-based axis indices like 1,2") from None


# --------------------------------------------------------------------------
# commands


def cmd_analyze(args):
    started = time.perf_counter()
    sf, digest = _load(args.file)
    if sf.kind != "lti":
        raise Failure(EXIT_PARSE, "SchemaError", f"analyze needs kind 'lti', got {sf.kind!r}")
    S = sf.system
    results = {"rho": spectral_radius(S.A)}
    files = {}
    alpha = args.alpha if args.alpha is not None else sf.alpha
    optimize = args.optimize or (alpha is None and args.sweep is None)

    if alpha is not None and not args.optimize:
        value = eps_alpha_norm(S, alpha)
        results.update(alpha=alpha, eps_alpha_norm=value)
        _emit("alpha", alpha)
        _emit("eps_alpha_norm", value)
    if optimize:
        res = eps_norm(S, args.grid_points, args.refine_tol, args.threads)
        results.update(
            eps_norm=res.value, alpha_star=res.alpha_star, boundary_minimum=res.boundary_minimum
        )
        _emit("eps_norm", res.value)
        _emit("alpha_star", res.alpha_star)
        _emit("boundary_minimum", res.boundary_minimum)
    if args.sweep is not None:
        lo, hi, pts = args.sweep
        curve = alpha_sweep(lambda a: eps_alpha_norm(S, a), lo, hi, pts, args.threads)
        path = args.curve or _sibling(args.out, "curve.csv")
        rows = [
            (p.alpha, "" if p.value is None else fmt(p.value), "true" if p.feasible else "false")
            for p in curve.points
        ]
        write_atomic(path, csv_text(("alpha", "eps_alpha_norm", "feasible"), rows))
        files["curve"] = str(path)
        results["sweep"] = {"lo": lo, "hi": hi, "points": pts,
                            "feasible": sum(p.feasible for p in curve.points)}
        _emit("curve", str(path))
        _emit("feasible_points", results["sweep"]["feasible"])
    _write_report(args.out, _report(args, digest, results, started, files=files))
    return EXIT_OK


def _sibling(out, name):
    if out:
        p = Path(out)
        return p.with_name(f"{p.stem}_{name}")
    return Path(name)


def _synth_results(res, optimized):
    out = {
        "mode": res.kind,
        "alpha": res.alpha,
        "eps_alpha_norm": res.eps_alpha_norm,
        "recomputed_norm": res.recomputed_norm,
        "K": _tolist(res.K),
        "L": _tolist(res.L),
        "P": _tolist(res.P),
        "Q": _tolist(res.Q),
        "closed_loop": _realization(res.closed_loop),
        "closed_loop_rho": spectral_radius(res.closed_loop.A),
    }
    if res.norm_parts is not None:
        out["norm_parts"] = {
            "term_q": res.norm_parts.term_q,
            "term_kp": res.norm_parts.term_kp,
            "total": res.norm_parts.total,
        }
    if optimized:
        out["alpha_star"] = res.alpha
        out["eps_norm"] = res.eps_alpha_norm
        out["boundary_minimum"] = res.search.boundary_minimum
    return out


def _matrix_str(M):
    return "[" + "; ".join(" ".join(f"{v:.4g}" for v in row) for row in np.asarray(M)) + "]"


def _print_table(res, compare):
    rows = []
    if res.K is not None:
        rows.append(("K", _matrix_str(res.K)))
    if res.L is not None:
        rows.append(("L", _matrix_str(res.L)))
    rows.append(("eps-norm" if res.search is not None else "eps(alpha)-norm", f"{res.eps_alpha_norm:.4f}"))
    rows.append(("alpha", f"{res.alpha:.6f}"))
    ref = reference_table()["suboptimal"] if compare else None
    width = max(len(v) for _, v in rows) + 2
    header = f"{'':10}{'computed (optimal)':<{width}}"
    if ref:
        header += ref["label"]
    print(header)
    for name, value in rows:
        line = f"{name:10}{value:<{width}}"
        if ref:
            refval = {"K": _matrix_str(ref["K"]), "L": _matrix_str(ref["L"]),
                      "eps-norm": f"{ref['eps_norm']:.1f}"}.get(name, "")
            line += refval
        print(line)


def cmd_synth(args):
    started = time.perf_counter()
    sf, digest = _load(args.file)
    expected = MODE_KIND[args.mode]
    if sf.kind != expected:
        raise Failure(
            EXIT_PARSE, "SchemaError",
            f"mode {args.mode} needs a system file of kind {expected!r}, got {sf.kind!r}",
        )
    alpha = args.alpha if args.alpha is not None else sf.alpha
    if args.optimize or alpha is None:
        res = optimize_synthesis(sf.system, args.mode, args.grid_points, args.refine_tol, args.threads)
        optimized = True
    else:
        res = synthesize(sf.system, alpha, args.mode)
        optimized = False
    results = _synth_results(res, optimized)
    if args.compare_reference:
        results["reference"] = reference_table()
    _print_table(res, args.compare_reference)
    _write_report(args.out, _report(args, digest, results, started))
    return EXIT_OK


def _resolve_closed_loop(args, raw_doc, sf):
    """(system, alpha, description) for the simulate command."""
    if sf is None:
        res = raw_doc["results"]
        cl = res["closed_loop"]
        S = LtiSystem(cl["A"], cl["B"], cl["C"], cl.get("D"))
        alpha = args.alpha if args.alpha is not None else res["alpha"]
        return S, alpha, f"closed loop from {res.get('mode', 'synthesis')} report"
    if sf.kind == "lti":
        alpha = args.alpha if args.alpha is not None else sf.alpha
        if alpha is None:
            alpha = eps_norm(sf.system, workers=args.threads).alpha_star
        return sf.system, alpha, "open-loop lti system"
    mode = KIND_MODE[sf.kind]
    alpha = args.alpha if args.alpha is not None else sf.alpha
    if alpha is None:
        res = optimize_synthesis(sf.system, mode, workers=args.threads)
    else:
        res = synthesize(sf.system, alpha, mode)
    return res.closed_loop, res.alpha, f"{mode} closed loop"


def cmd_simulate(args):
    started = time.perf_counter()
    try:
        data = Path(args.file).read_bytes()
    except OSError as exc:
        raise Failure(EXIT_PARSE, "IOError", f"cannot read {args.file}: {exc.strerror}") from None
    digest = hashlib.sha256(data).hexdigest()
    try:
        raw = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SchemaError(f"invalid JSON: {exc}") from None
    is_report = isinstance(raw, dict) and "closed_loop" in (raw.get("results") or {})
    sf = None if is_report else parse_system(data)
    S, alpha, source = _resolve_closed_loop(args, raw, sf)
    cert = solve_p_alpha(S.A, S.B, alpha)

    kind = DisturbanceKind(args.dist)
    seeds = [(args.seed + r) % 2**64 for r in range(args.runs)]
    W = np.stack([
        gen_disturbance(DisturbanceSpec(kind, args.steps, S.m, s), S, cert) for s in seeds
    ])
    states = simulate_runs(S, W)
    stats = containment_stats(states, cert)

    out = Path(args.out)
    first = simulate(S, W[0])
    header = (["k"] + [f"x{i + 1}" for i in range(S.n)] + [f"z{i + 1}" for i in range(S.p)] + ["|w|"])
    wnorm = np.linalg.norm(first.disturbances, axis=1)
    rows = [
        [str(k), *first.states[k], *first.outputs[k], wnorm[k]] for k in range(first.steps)
    ]
    files = {"trajectory": str(out / "trajectory.csv")}
    write_atomic(files["trajectory"], csv_text(header, rows))
    if S.n >= 2:
        pts = ellipsoid_boundary_points(cert, args.plane, args.ellipse_points)
        files["ellipse"] = str(out / "ellipse.csv")
        write_atomic(files["ellipse"], csv_text(("px", "py"), pts.tolist()))

    results = {
        "source": source,
        "alpha": alpha,
        "disturbance": kind.value,
        "runs": args.runs,
        "steps": args.steps,
        "seeds": [seeds[0], seeds[-1]],
        "max_quadratic": stats.max_quadratic,
        "violations": stats.violations,
        "samples": stats.samples,
        "P_alpha": _tolist(cert.shape),
    }
    files["report"] = str(out / "report.json")
    _write_report(files["report"], _report(args, digest, results, started, seed=args.seed, files=files))
    _emit("alpha", alpha)
    _emit("max_quadratic", stats.max_quadratic)
    _emit("violations", stats.violations)
    _emit("samples", stats.samples)
    if args.strict and stats.violations:
        raise Failure(EXIT_CONTAINMENT, "ContainmentViolation",
                      f"{stats.violations} samples left the invariant ellipsoid")
    return EXIT_OK


def cmd_fixture(args):
    sys.stdout.write(bundled_path(FIXTURES[args.name]).read_text())
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="epsctl",
        description="eps-norm analysis and eps-optimal synthesis of discrete-time "
        "linear systems under bounded disturbances.",
    )
    parser.add_argument("--version", action="version",
                        version=f"epsctl {__version__} (rng {RNG_NAME})")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--grid-points", type=int, default=199)
        p.add_argument("--refine-tol", type=float, default=1e-6)
        p.add_argument("--threads", type=int, default=None,
                       help=f"parallel sweep workers (default: ${ENV_VAR} or 1)")

    p = sub.add_parser("analyze", help="eps(alpha)- and eps-norm of an lti system")
    p.add_argument("file")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--alpha", type=float)
    g.add_argument("--optimize", action="store_true")
    p.add_argument("--sweep", type=_sweep_arg, metavar="LO:HI:POINTS")
    p.add_argument("--curve", help="sweep CSV path (default: next to --out, or ./curve.csv)")
    p.add_argument("--out", help="run report JSON path")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synth", help="eps-optimal gains")
    p.add_argument("file")
    p.add_argument("--mode", required=True, choices=sorted(MODE_KIND))
    g = p.add_mutually_exclusive_group()
    g.add_argument("--alpha", type=float)
    g.add_argument("--optimize", action="store_true")
    p.add_argument("--out", help="gains/report JSON path")
    p.add_argument("--compare-reference", action="store_true",
                   help="show the published sub-optimal design alongside")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("simulate", help="Monte Carlo containment check and plot data")
    p.add_argument("file", help="system file or synth report")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--dist", default=DisturbanceKind.EXTREME_SWITCHING.value,
                   choices=[k.value for k in DisturbanceKind])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--alpha", type=float)
    p.add_argument("--out", default="simulation")
    p.add_argument("--plane", type=_plane_arg, default=(0, 1), metavar="I,J")
    p.add_argument("--ellipse-points", type=int, default=200)
    p.add_argument("--strict", action="store_true", help="exit 5 on any containment violation")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fixture", help="print a bundled system file")
    p.add_argument("name", choices=sorted(FIXTURES))
    p.set_defaults(func=cmd_fixture)
    return parser


def _fail(code, kind, message, **extra):
    fields = " ".join(f"{k}={v}" for k, v in extra.items())
    line = f"error code={code} type={kind}" + (f" {fields}" if fields else "")
    print(f"{line} message={json.dumps(message)}", file=sys.stderr)
    return code


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = ["epsctl", *argv]
    try:
        return args.func(args)
    except Failure as exc:
        return _fail(exc.code, exc.kind, str(exc))
    except SchemaError as exc:
        extra = {"field": exc.field} if exc.field else {}
        return _fail(EXIT_PARSE, type(exc).__name__, str(exc), **extra)
    except EpsCtlError as exc:
        extra = {}
        if hasattr(exc, "lo"):
            extra["interval"] = f"({fmt(exc.lo)},{fmt(exc.hi)})"
        code = exc.exit_code
        if isinstance(exc, StructuralError):
            code = EXIT_STRUCTURAL
        return _fail(code, type(exc).__name__, str(exc), **extra)


if __name__ == "__main__":
    sys.exit(main())
