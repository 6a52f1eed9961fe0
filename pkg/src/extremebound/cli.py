"""Command-line front end.

Commands: ``bound``, ``lower``, ``localize``, ``check`` and ``export``.
Numbers print with 9 significant digits.  ``bound`` exits 0 when every solve
ends Optimal, 2 when one is infeasible and 3 otherwise; ``check`` exits 0 iff
the certificate passes.  Bad input files exit 1; usage errors exit 2.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from . import problemfile
from .bounds import compute_bound, iterative_tighten
from .localization import LevelSetGrid, compute_r_eps, compute_s_delta
from .polynomial import PolynomialParseError, parse
from .sdpsolve import Status
from .system import BUILTINS, TIME, augment_integral, builtin_problem
from .trajectories import check_certificate, lower_bound

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_TROUBLE = 0, 1, 2, 3


class InputError(Exception):
    pass


def fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.9g}"
    return str(x)


def _round(x):
    """9-significant-digit float for JSON output (None for non-finite)."""
    if x is None or not math.isfinite(x):
        return None
    return float(f"{x:.9g}")


# ---------------------------------------------------------------------------
# inputs


def _add_problem_args(p):
    src = p.add_argument_group("problem")
    src.add_argument("--problem", metavar="FILE", help="JSON problem file")
    src.add_argument("--builtin", metavar="NAME", choices=BUILTINS, help="built-in problem")
    src.add_argument("--x0", help="nonautonomous2d: point|circle; quadratic1d: initial value")
    src.add_argument("--horizon", help="T, or inf")
    src.add_argument("--N", type=int, help="burgers: number of modes")
    src.add_argument("--phi0", type=float, help="burgers: initial observable level")
    src.add_argument("--local", action="store_true", help="burgers: local (phi = phi0) version")


def load_problem(args, parser):
    if bool(args.problem) == bool(args.builtin):
        parser.error("give exactly one of --problem and --builtin")
    if args.problem:
        given = [f for f in ("x0", "horizon", "N", "phi0") if getattr(args, f) is not None]
        if given or args.local:
            parser.error("--x0/--horizon/--N/--phi0/--local only apply to --builtin")
        try:
            return problemfile.load(args.problem)
        except OSError as exc:
            raise InputError(f"cannot read {args.problem}: {exc.strerror}") from None
        except problemfile.ProblemFileError as exc:
            raise InputError(f"{args.problem}: {exc}") from None
    params = {k: getattr(args, k) for k in ("x0", "horizon", "N", "phi0") if getattr(args, k) is not None}
    if args.local:
        params["local"] = "true"
    try:
        return builtin_problem(args.builtin, params)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def read_v(path, spec):
    """V from a file: either JSON ``{"variables": [...], "V": "..."}`` or bare polynomial text.

    Bare text may use t and the problem's state names.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    variables = spec.variables
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
            text, variables = doc["V"], tuple(doc["variables"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise InputError(f"{path}: not a V file ({exc})") from None
    unknown = set(variables) - set(spec.variables)
    if unknown:
        raise InputError(f"{path}: variables {sorted(unknown)} are not in the problem")
    try:
        return parse(text.strip(), variables).with_variables(spec.variables)
    except PolynomialParseError as exc:
        raise InputError(f"{path}: {exc}") from None


def write_v(path, V, lam, degree, status):
    variables = [v for v in V.variables if v != TIME or V.depends_on(TIME)]
    doc = {"variables": variables, "V": V.with_variables(variables).to_string(),
           "lambda": lam, "degree": degree, "status": str(status)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def parse_box(text, parser):
    box = []
    for part in text.split(","):
        try:
            lo, hi = (float(s) for s in part.split(":"))
        except ValueError:
            parser.error(f"--box: expected lo:hi[,lo:hi...], got {part!r}")
        if not (math.isfinite(lo) and math.isfinite(hi)) or not lo <= hi:
            parser.error(f"--box: {part!r} is not a finite interval")
        box.append((lo, hi))
    return box


def parse_res(text, naxes, parser):
    try:
        res = [int(s) for s in text.split(",")]
    except ValueError:
        parser.error(f"--res: expected integers, got {text!r}")
    if len(res) == 1:
        res = res * naxes
    if len(res) != naxes or any(r < 1 for r in res):
        parser.error(f"--res: need one positive count, or one per box axis ({naxes})")
    return res


def _default_box(spec, V):
    states = [(-2.0, 2.0)] * spec.n
    if V.depends_on(TIME):
        T = spec.horizon.T if spec.horizon.finite else spec.t0 + 10.0
        return [(spec.t0, T)] + states
    return states


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


BOUND_FIELDS = ("degree", "iteration", "lambda", "status", "gap", "seconds")


def cmd_bound(args, parser):
    spec = load_problem(args, parser)
    try:
        degrees = [int(d) for d in args.degree.split(",")]
    except ValueError:
        parser.error(f"--degree: expected integers, got {args.degree!r}")
    if degrees != sorted(set(degrees)) or any(d < 1 for d in degrees):
        parser.error("--degree: list positive degrees in ascending order")
    if args.iterate is not None and args.iterate < 1:
        parser.error("--iterate needs N >= 1")
    if args.terminal_time and not spec.horizon.finite:
        parser.error("--terminal-time needs a finite horizon")
    if args.integral:
        try:
            spec = augment_integral(spec)
        except ValueError as exc:
            raise InputError(str(exc)) from None
    options = {"time_independent": args.time_independent, "terminal_time": args.terminal_time,
               "decay_multiplier_degree": args.decay_multiplier_degree,
               "solver_options": {"gap_tol": args.gap_tol}}
    results = []
    for d in degrees:
        if args.iterate:
            results += iterative_tighten(spec, d, max_iters=args.iterate, stop_tol=0.0, **options)
        else:
            results.append(compute_bound(spec, d, **options))
    rows = [dict(zip(BOUND_FIELDS, (r.degree, r.iteration, r.lam, str(r.status), r.gap, r.wall_time)))
            for r in results]
    if args.format == "json":
        for row, r in zip(rows, results):
            for key in ("lambda", "gap", "seconds"):
                row[key] = _round(row[key])
            row["message"] = r.message
            row["V"] = r.V.to_string(9) if r.V is not None else None
        text = json.dumps(rows, indent=1) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(BOUND_FIELDS)
        for row in rows:
            w.writerow([fmt(row[k]) for k in BOUND_FIELDS])
        text = buf.getvalue()
    _emit(text, args.out)
    for r in results:
        if r.status != Status.OPTIMAL:
            print(f"degree {r.degree} iteration {r.iteration}: {r.status}"
                  + (f" ({r.message})" if r.message else ""), file=sys.stderr)
    last = results[-1]
    if args.v_out and last.V is not None:
        write_v(args.v_out, last.V, last.lam, last.degree, last.status)
    statuses = {r.status for r in results}
    if statuses <= {Status.OPTIMAL}:
        return EXIT_OK
    if statuses & {Status.PRIMAL_INFEASIBLE, Status.DUAL_INFEASIBLE}:
        return EXIT_INFEASIBLE
    return EXIT_TROUBLE


def cmd_lower(args, parser):
    spec = load_problem(args, parser)
    if args.starts < 1:
        parser.error("--starts needs K >= 1")
    try:
        lb = lower_bound(spec, starts=args.starts, t_end=args.t_end, seed=args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    row = {"lower": lb.value, "time": lb.time, "x0": [float(v) for v in lb.x0],
           "parameter": [float(v) for v in lb.parameter], "evaluations": lb.evaluations}
    if args.format == "json":
        row.update(lower=_round(lb.value), time=_round(lb.time),
                   x0=[_round(v) for v in row["x0"]], parameter=[_round(v) for v in row["parameter"]])
        text = json.dumps(row) + "\n"
    else:
        text = ("lower,time,x0,parameter,evaluations\n"
                f"{fmt(lb.value)},{fmt(lb.time)},{' '.join(fmt(v) for v in row['x0'])},"
                f"{' '.join(fmt(v) for v in row['parameter'])},{lb.evaluations}\n")
    _emit(text, args.out)
    return EXIT_OK


def cmd_localize(args, parser):
    if args.delta is not None and args.lam is None:
        parser.error("--delta needs --lambda")
    if args.lam is not None and args.delta is None:
        parser.error("--lambda needs --delta")
    if args.delta is None and args.eps is None:
        parser.error("give --lambda/--delta, --eps, or both")
    if (args.delta is not None and args.delta < 0) or (args.eps is not None and args.eps < 0):
        parser.error("--delta and --eps must be nonnegative")
    spec = load_problem(args, parser)
    V = read_v(args.v_file, spec)
    box = parse_box(args.box, parser) if args.box else _default_box(spec, V)
    res = parse_res(args.res, len(box), parser)
    grids = {}
    try:
        if args.delta is not None:
            grids["S"] = compute_s_delta(V, args.lam, args.delta, spec, box, res)
        if args.eps is not None:
            grids["R"] = compute_r_eps(V, args.eps, spec, box, res)
    except ValueError as exc:
        parser.error(str(exc))
    if len(grids) == 2:
        grids["AND"] = grids["S"].intersect(grids["R"])
    for kind, grid in grids.items():
        stem = f"{args.out}-{kind}"
        grid.to_csv(stem + ".csv")
        grid.write_rle(stem + ".rle")
        print(f"{kind}: {grid.count} of {len(grid.mask)} nodes -> {stem}.csv, {stem}.rle")
    return EXIT_OK


def cmd_check(args, parser):
    spec = load_problem(args, parser)
    V = read_v(args.v_file, spec)
    box = parse_box(args.box, parser) if args.box else _default_box(spec, V)
    res = parse_res(args.res, len(box), parser)
    if len(box) not in (spec.n, spec.n + 1):
        parser.error(f"--box needs {spec.n} (state) or {spec.n + 1} (time and state) axes")
    try:
        report = check_certificate(V, spec, box, res, tol=args.tol)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    doc = report.to_dict()
    for key in ("maxLieViolation", "maxPhiViolation"):
        doc[key] = _round(doc[key])
    for key in ("lieArgmax", "phiArgmax"):
        doc[key] = [_round(v) for v in doc[key]]
    print(json.dumps(doc))
    return EXIT_OK if report.passed else EXIT_INPUT


def cmd_export(args, parser):
    spec = load_problem(args, parser)
    _emit(problemfile.dumps(spec), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="extremebound",
                                     description="Bounds on extreme values along ODE trajectories.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", help="upper bound from an auxiliary-function SDP")
    _add_problem_args(p)
    p.add_argument("--degree", required=True, help="degree of V, or an ascending comma list")
    p.add_argument("--time-independent", action="store_true", help="search V(x) only")
    p.add_argument("--iterate", type=int, metavar="N", help="tightening rounds per degree")
    p.add_argument("--integral", action="store_true", help="bound Phi plus the time integral of the integrand")
    p.add_argument("--terminal-time", action="store_true", help="bound Phi at the final time only")
    p.add_argument("--gap-tol", type=float, default=1e-8, help="solver duality-gap tolerance")
    p.add_argument("--decay-multiplier-degree", type=int, metavar="D",
                   help="degree of the multipliers in the decay condition (default: largest allowed)")
    p.add_argument("--out", metavar="FILE", help="write result rows here instead of stdout")
    p.add_argument("--v-out", metavar="FILE", help="write the last V here")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("lower", help="lower bound from a trajectory search")
    _add_problem_args(p)
    p.add_argument("--starts", type=int, default=16, metavar="K")
    p.add_argument("--t-end", type=float, help="integration end time")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", metavar="FILE")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_lower)

    p = sub.add_parser("localize", help="grid the sets that hold near-extremal trajectories")
    _add_problem_args(p)
    p.add_argument("--v-file", required=True)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--box", help="lo:hi per axis, comma separated (time first if V depends on t)")
    p.add_argument("--res", default="101", help="nodes per axis: one count or one per axis")
    p.add_argument("--out", default="localize", metavar="PREFIX",
                   help="writes PREFIX-S/R/AND .csv and .rle")
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("check", help="grid check of an auxiliary function")
    _add_problem_args(p)
    p.add_argument("--v-file", required=True)
    p.add_argument("--box")
    p.add_argument("--res", default="101")
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("export", help="write a problem as a JSON problem file")
    _add_problem_args(p)
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
