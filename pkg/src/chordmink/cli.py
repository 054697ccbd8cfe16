"""Command-line interface: ``python -m chordmink <subcommand> ...``.

Exit codes: 0 on success, 2 when a solve (or verification) misses its
residual tolerance, 1 on input errors.
"""
import argparse
import hashlib
import json
import logging
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .chord import chord_integral, chord_integral_reference
from .measure import (
    MeasureError,
    load_measure,
    sample_general_position,
    validate_general_position,
)
from .polytope import PolytopeError, load_polytope
from .quadrature import QuadratureScheme
from .solver import SolverConfig, SolverError, outer_solve, verify

logger = logging.getLogger("chordmink")

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class InputError(Exception):
    """Bad arguments or unreadable input; maps to exit code 1."""


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no inf/nan
        return x if np.isfinite(x) else None
    return obj


def dumps(report):
    # json writes floats via repr, the shortest string that round-trips
    return json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"


def write_atomic(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".chordmink-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _budget(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("--budget expects M,section,facet_order")
    try:
        vals = [int(x) if x.strip() else None for x in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--budget expects integers, got {text!r}")
    return vals


def build_parser():
    parser = argparse.ArgumentParser(prog="chordmink", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, measure=False, polytope=False):
        if measure:
            p.add_argument("--measure", required=True, help="measure JSON file")
        if polytope:
            p.add_argument("--polytope", required=True, help="polytope JSON file")
        p.add_argument("--budget", type=_budget, default=None,
                       help="quadrature budget M,section,facet_order (empty = default)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out", help="report path (default: standard output)")

    p = sub.add_parser("solve", help="solve the L_p chord Minkowski problem")
    common(p, measure=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-2, help="residual tolerance")
    p.add_argument("--max-iter", type=int, default=500)

    p = sub.add_parser("verify", help="residuals of F_{p,q}(P) against a measure")
    common(p, measure=True, polytope=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-2)

    p = sub.add_parser("integrals", help="chord integrals I_q(P)")
    common(p, polytope=True)
    p.add_argument("--q", type=_float_list, required=True, help="comma-separated exponents")

    p = sub.add_parser("gen-measure", help="random measure in general position")
    common(p)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--atoms", type=int, required=True)

    p = sub.add_parser("check-gp", help="general-position check of a measure")
    common(p, measure=True)
    return parser


def _scheme(args, dim):
    M, section, order = args.budget if args.budget else (None, None, None)
    kw = {}
    if section is not None:
        kw["section_budget"] = section
    if order is not None:
        kw["facet_order"] = order
    try:
        return QuadratureScheme(dim, n_directions=M, seed=args.seed, n_jobs=args.jobs, **kw)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _manifest(args, config, inputs):
    return {
        "subcommand": args.command,
        "version": __version__,
        "config": config,
        "inputs": {os.path.basename(p): _digest(p) for p in inputs},
    }


def _load_measure(path):
    try:
        return load_measure(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _load_polytope(path):
    try:
        return load_polytope(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _check_pq(args):
    if not args.p < 0:
        raise InputError("p must be negative")
    if not args.q >= 1:
        raise InputError("q must be >= 1")


def cmd_solve(args):
    _check_pq(args)
    m = _load_measure(args.measure)
    scheme = _scheme(args, m.dim)
    try:
        cfg = SolverConfig(p=args.p, q=args.q, residual_tol=args.tol,
                           max_outer=args.max_iter, scheme=scheme, seed=args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    gp = validate_general_position(m, seed=args.seed)
    if not gp.in_general_position:
        raise InputError(_gp_message(gp))
    report = outer_solve(m, cfg, check_general_position=False).to_dict()
    report["manifest"] = _manifest(args, cfg.to_dict(), [args.measure])
    return report, 0 if report["converged"] else 2


def cmd_verify(args):
    _check_pq(args)
    m = _load_measure(args.measure)
    P = _load_polytope(args.polytope)
    if P.dim != m.dim:
        raise InputError("measure and polytope dimensions differ")
    scheme = _scheme(args, m.dim)
    r, summary = verify(P, m, args.p, args.q, scheme)
    report = {"residual": r, "summary": summary, "tol": args.tol,
              "passed": bool(summary["max"] <= args.tol)}
    config = {"p": args.p, "q": args.q, "tol": args.tol, "scheme": scheme.to_dict()}
    report["manifest"] = _manifest(args, config, [args.measure, args.polytope])
    return report, 0 if report["passed"] else 2


def cmd_integrals(args):
    P = _load_polytope(args.polytope)
    scheme = _scheme(args, P.dim)
    if any(q < 0 for q in args.q):
        raise InputError("q must be nonnegative")
    vals, errs = chord_integral(P, args.q, scheme, return_error=True)
    rows = []
    for q, val, err in zip(args.q, vals, errs):
        row = {"q": q, "value": val, "estimated_error": err, "reference": None}
        if q in (0, 1, P.dim + 1):
            row["reference"] = chord_integral_reference(P, q)
        rows.append(row)
    config = {"q": args.q, "scheme": scheme.to_dict()}
    return {"integrals": rows, "manifest": _manifest(args, config, [args.polytope])}, 0


def cmd_gen_measure(args):
    if args.dim < 2 or args.atoms <= args.dim:
        raise InputError("need dim >= 2 and atoms > dim")
    m = sample_general_position(args.dim, args.atoms, args.seed)
    report = m.to_dict()
    config = {"dim": args.dim, "atoms": args.atoms, "seed": args.seed}
    report["manifest"] = _manifest(args, config, [])
    return report, 0


def _gp_message(gp):
    if gp.dependent_subset is not None:
        return f"not in general position: dependent_subset {list(gp.dependent_subset)}"
    if gp.hemisphere_witness is not None:
        w = ", ".join(f"{x:.6g}" for x in gp.hemisphere_witness)
        return f"not in general position: normals lie in a closed hemisphere (witness [{w}])"
    return "not in general position"


def cmd_check_gp(args):
    m = _load_measure(args.measure)
    gp = validate_general_position(m, seed=args.seed)
    report = gp.to_dict()
    report["manifest"] = _manifest(args, {"seed": args.seed}, [args.measure])
    if not gp.in_general_position:
        return report, 1, _gp_message(gp)
    return report, 0


COMMANDS = {
    "solve": cmd_solve,
    "verify": cmd_verify,
    "integrals": cmd_integrals,
    "gen-measure": cmd_gen_measure,
    "check-gp": cmd_check_gp,
}


def _setup_logging():
    level = LOG_LEVELS.get(os.environ.get("CHORDMINK_LOG", "error").lower(), logging.ERROR)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def run(argv=None):
    """Run the CLI and return the exit code."""
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; those are input errors here
        return 0 if exc.code == 0 else 1
    try:
        result = COMMANDS[args.command](args)
    except (InputError, MeasureError, PolytopeError, SolverError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    report, code = result[0], result[1]
    text = dumps(report)
    if args.out:
        try:
            write_atomic(args.out, text)
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc.strerror}", file=sys.stderr)
            return 1
    else:
        sys.stdout.write(text)
    if len(result) > 2:
        print(f"error: {result[2]}", file=sys.stderr)
    elif code == 2:
        print("warning: residual above tolerance", file=sys.stderr)
    return code


def main():
    sys.exit(run())
