"""Command-line front end: one binary, one subcommand per computation.

Every subcommand writes JSON (sorted keys) to stdout or --output. Exit codes:
0 success, 1 nothing found within the budget, 2 usage error. All randomness
comes from --seed; GRR_THREADS caps the number of restart threads without
changing any result.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import cubature, obstruction, roundsearch, sections, sylowtree
from .polyring import SparsePoly, polys_from_text

EXIT_OK, EXIT_NOT_FOUND, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def emit_plot_data(series: dict) -> str:
    """CSV text with one column per named series (header row first)."""
    names = list(series)
    lengths = {len(v) for v in series.values()}
    if len(lengths) > 1:
        raise ValueError("ragged series")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for row in zip(*(series[n] for n in names)):
        w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def running_min(values):
    out, cur = [], float("inf")
    for v in values:
        cur = min(cur, v)
        out.append(cur)
    return out


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, default=_json_default) + "\n"


def _require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required for {args.command}")


def _load_polys(args, nvars=None):
    lines = []
    for p in args.poly or []:
        lines.append(p)
    if args.poly_file:
        with open(args.poly_file) as fh:
            lines.extend(ln for ln in fh.read().splitlines() if ln.strip() and not ln.lstrip().startswith("#"))
    if not lines:
        raise UsageError("give at least one --poly or a --poly-file")
    nvars = nvars or args.n
    return polys_from_text(lines, nvars)


# subcommands


def cmd_obstruction(args):
    _require(args, "d", "k")
    field = args.field or "real"
    return obstruction.obstruction_report(args.d, args.k, field), EXIT_OK


def cmd_bounds(args):
    _require(args, "d", "k")
    d, k, m = args.d, args.k, args.m or 1
    out = {"thm6": obstruction.bound_thm6(d, k), "thm7": obstruction.bound_thm7(d, k, m),
           "lower": obstruction.bound_lower(d, k)}
    if d % 2:
        out["thm4"] = obstruction.bound_thm4(d, k)
        out["thm5"] = obstruction.bound_thm5(d, k, m)
    else:
        out["thm4"] = out["thm5"] = None
    return out, EXIT_OK


def cmd_identity(args):
    dmax = args.d if args.d is not None else 8
    kmax = args.k if args.k is not None else 8
    table = [[d, k, obstruction.binomial_identity_check(d, k)] for d in range(dmax + 1) for k in range(kmax + 1)]
    return {"all_true": all(t[2] for t in table), "checked": len(table), "table": table}, EXIT_OK


def cmd_orbits(args):
    delta = args.delta or args.d or 2
    height = args.height or 10
    counts = [sylowtree.orbit_count(delta, h) for h in range(1, height + 1)]
    out = {"delta": delta, "heights": list(range(1, height + 1)), "counts": counts,
           "fitted_constant": sylowtree.fitted_growth_constant(delta, range(1, height + 1))}
    if args.format == "csv":
        return emit_plot_data({"h": out["heights"], "count": counts}), EXIT_OK
    if height <= 6:
        out["keys"] = [e.key.to_json() for e in sylowtree.enumerate_orbits(delta, height)]
    return out, EXIT_OK


def cmd_cubature(args):
    _require(args, "k")
    if args.poly or args.poly_file:
        fs = _load_polys(args, args.k)
        res = cubature.lemma2(fs, args.k, seed=args.seed, tol=args.tol)
        ts, residuals = res.transforms, res.residuals
    else:
        _require(args, "d")
        ts = cubature.universal_cubature(args.k, args.d, seed=args.seed, tol=args.tol)
        residuals = None
    return {"k": args.k, "count": len(ts), "transforms": [t.to_json() for t in ts],
            "residuals": residuals}, EXIT_OK


def cmd_forms(args):
    _require(args, "k", "d")
    sched = cubature.ConstructionSchedule.parse(args.k, args.d, args.schedule)
    try:
        rc = cubature.build_recursive_forms(args.k, args.d, sched, seed=args.seed)
    except cubature.StageFailure as exc:
        return {"error": str(exc), "stage": exc.stage}, EXIT_NOT_FOUND
    return rc.to_json(), EXIT_OK


def cmd_search(args):
    _require(args, "k")
    mode = args.mode or "odd-zero"
    fs = _load_polys(args)
    tol = args.tol
    if mode == "complex-zero":
        rep = roundsearch.complex_search(fs, args.k, restarts=args.restarts, seed=args.seed, tol=tol)
    else:
        if mode not in roundsearch.MODES:
            raise UsageError(f"unknown mode {mode}")
        rep = roundsearch.search(fs, args.k, mode, restarts=args.restarts, seed=args.seed, tol=tol)
    code = EXIT_OK if rep.success else EXIT_NOT_FOUND
    if args.format == "csv":
        return emit_plot_data({"restart": list(range(len(rep.history))), "residual": rep.history,
                               "best": running_min(rep.history)}), code
    return rep.to_json(), code


def _quadratic_matrix(f: SparsePoly) -> np.ndarray:
    if not f.is_homogeneous(2):
        raise UsageError("quadratic needs a homogeneous quadratic form")
    n = f.nvars
    A = np.zeros((n, n))
    for mono, c in f.terms.items():
        idx = [i for i, a in enumerate(mono) for _ in range(a)]
        i, j = idx
        if i == j:
            A[i, i] += float(c)
        else:
            A[i, j] += float(c) / 2
            A[j, i] += float(c) / 2
    return A


def cmd_quadratic(args):
    _require(args, "k")
    if args.poly or args.poly_file:
        A = _quadratic_matrix(_load_polys(args)[0])
    else:
        n = args.n or 2 * args.k - 1
        G = np.random.default_rng(args.seed).standard_normal((n, n))
        A = (G + G.T) / 2
    q = roundsearch.exact_round_quadratic(A, args.k)
    code = EXIT_OK if q.residual <= max(args.tol, 1e-10) else EXIT_NOT_FOUND
    return {"n": A.shape[0], "k": args.k, "value": q.value, "residual": q.residual,
            "frame": q.frame.to_json()}, code


def _load_bodies(args):
    if args.bodies:
        with open(args.bodies) as fh:
            data = json.load(fh)
        if isinstance(data, dict):
            data = [data]
        out = []
        for b in data:
            if "shape" in b:
                c = np.asarray(b["center"], dtype=float)
                out.append(sections.Ellipsoid(c, np.asarray(b["shape"], dtype=float).reshape(c.size, c.size)))
            else:
                out.append(sections.Polytope.from_json(b))
        return out
    n = args.n or 5
    count = args.m or 1
    rng = np.random.default_rng([args.seed, 99])
    return [sections.random_symmetric_polytope(n, 20, rng) for _ in range(count)]


def cmd_sections(args):
    _require(args, "k")
    bodies = _load_bodies(args)
    mode = args.mode or "projection"
    x = None
    if mode == "section":
        x = np.zeros(bodies[0].dim) if args.point is None else np.array([float(t) for t in args.point.split(",")])
    rep = sections.search_section_subspace(bodies, args.k, mode=mode, x=x, ellipsoid=args.ellipsoid,
                                           restarts=args.restarts, seed=args.seed,
                                           tol=args.tol if args.tol_given else 1e-6)
    code = EXIT_OK if rep.success else EXIT_NOT_FOUND
    if args.format == "csv":
        return emit_plot_data({"restart": list(range(len(rep.history))), "residual": rep.history,
                               "best": running_min(rep.history)}), code
    return rep.to_json(), code


def cmd_verify(args):
    """Residual of given polynomials on a given frame (JSON array of rows)."""
    _require(args, "frame")
    with open(args.frame) as fh:
        data = json.load(fh)
    rows = data["frame"] if isinstance(data, dict) else data
    A = np.array(rows, dtype=float)
    fs = _load_polys(args, A.shape[1])
    mode = args.mode or ("odd-zero" if fs[0].degree() % 2 else "even-round")
    res = [roundsearch.residual(f, A, mode) for f in fs]
    worst = max(res)
    return {"mode": mode, "residuals": res, "residual": worst, "ok": worst <= args.tol}, (
        EXIT_OK if worst <= args.tol else EXIT_NOT_FOUND)


COMMANDS = {
    "obstruction": cmd_obstruction,
    "bounds": cmd_bounds,
    "orbits": cmd_orbits,
    "cubature": cmd_cubature,
    "forms": cmd_forms,
    "search": cmd_search,
    "quadratic": cmd_quadratic,
    "sections": cmd_sections,
    "verify": cmd_verify,
    "identity": cmd_identity,
}

_NUM = (int, float)
_OPT_INT = (int, type(None))
_REPORT = {"frame": list, "k": int, "mode": str, "n": int, "residual": _NUM, "restarts": int,
           "seed": int, "success": bool}

# required keys and their JSON types for each subcommand's object output
SCHEMAS = {
    "obstruction": {"d": int, "k": int, "field": str, "top_class": list, "minimal_n": _OPT_INT,
                    "thm_bound": int, "lower_bound": int},
    "bounds": {"lower": int, "thm4": _OPT_INT, "thm5": _OPT_INT, "thm6": int, "thm7": int},
    "identity": {"all_true": bool, "checked": int, "table": list},
    "orbits": {"delta": int, "heights": list, "counts": list, "fitted_constant": _NUM},
    "cubature": {"k": int, "count": int, "transforms": list, "residuals": (list, type(None))},
    "forms": {"sizes": list, "stage_counts": list, "forms": list, "max_residual": _NUM, "a_priori_bound": int},
    "search": _REPORT,
    "quadratic": {"n": int, "k": int, "value": _NUM, "residual": _NUM, "frame": list},
    "sections": _REPORT,
    "verify": {"mode": str, "residuals": list, "residual": _NUM, "ok": bool},
}


def schema_errors(command: str, obj) -> list:
    """Problems with obj as output of command (empty when it conforms)."""
    if not isinstance(obj, dict):
        return ["output is not an object"]
    if command == "forms" and "error" in obj:
        schema = {"error": str, "stage": int}
    else:
        schema = SCHEMAS[command]
    out = []
    for key, kind in schema.items():
        if key not in obj:
            out.append(f"missing key {key}")
        elif not isinstance(obj[key], kind) or (isinstance(obj[key], bool) and bool not in (
                kind if isinstance(kind, tuple) else (kind,))):
            out.append(f"key {key} has type {type(obj[key]).__name__}")
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--d", type=int)
    common.add_argument("--k", type=int)
    common.add_argument("--m", type=int)
    common.add_argument("--n", type=int)
    common.add_argument("--field", choices=["real", "complex"])
    common.add_argument("--mode")
    common.add_argument("--poly", action="append")
    common.add_argument("--poly-file")
    common.add_argument("--bodies")
    common.add_argument("--restarts", type=int, default=100)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float)
    common.add_argument("--schedule")
    common.add_argument("--output")
    common.add_argument("--format", choices=["json", "csv", "text"], default="json")
    common.add_argument("--delta", type=int)
    common.add_argument("--height", type=int)
    common.add_argument("--ellipsoid", choices=["lowner", "john"], default="lowner")
    common.add_argument("--point")
    common.add_argument("--frame")
    parser = _Parser(prog="grr", description="Round and zero restrictions of polynomials: "
                     "obstructions, orbit combinatorics, cubatures and searches.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=(fn.__doc__ or "").strip().splitlines()[0] if fn.__doc__ else None)
    return parser


def _text(obj) -> str:
    if isinstance(obj, str):
        return obj
    lines = []
    for key in sorted(obj):
        lines.append(f"{key}: {json.dumps(obj[key], sort_keys=True, default=_json_default)}")
    return "\n".join(lines) + "\n"


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("missing subcommand")
        args.tol_given = args.tol is not None
        if args.tol is None:
            args.tol = 1e-8
        result, code = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"grr: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"grr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if isinstance(result, str):
        text = result
    elif args.format == "text":
        text = _text(result)
    else:
        text = _dump(result)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
