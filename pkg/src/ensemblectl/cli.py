"""Command-line interface.

Exit codes: 0 success or controllable, 10 uncontrollable, 20 inconclusive,
11 unreachable target or error above threshold, 2 input error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import controllability as ctl
from .errors import EnsembleError, UnknownExampleError, UnreachableTargetError
from .model import BUILTINS, Scenario, builtin_example, compute_xi, load_document, make_grid, system_of, to_document
from .reachability import canary_target, numeric_reachability_test, build_generators
from .reporting import dumps
from .simulate import DEFAULT_SUBSTEPS, run_scenario
from .synthesis import DEFAULT_TRUNC_REL, TimeMesh

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_UNCONTROLLABLE = 10
EXIT_UNREACHABLE = 11
EXIT_INCONCLUSIVE = 20

STATUS_EXIT = {ctl.CONTROLLABLE: EXIT_OK, ctl.UNCONTROLLABLE: EXIT_UNCONTROLLABLE,
               ctl.INCONCLUSIVE: EXIT_INCONCLUSIVE}

# desk-scale settings per built-in scenario: grid count, Nt, error metric, threshold
SCENARIO_DEFAULTS = {
    "fig2": (41, 64, "absolute", 1e-2),
    "fig3": (21, 128, "relative", 5e-2),
    "fig4": (21, 256, "absolute", 1e-2),
}
GENERIC_DEFAULTS = (41, 64, "absolute", 1e-2)


class CliError(Exception):
    pass


def _parse_params(items):
    params = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise CliError(f"--param expects key=value, got {item!r}")
        try:
            params[key.strip()] = float(value)
        except ValueError:
            raise CliError(f"--param {key}: {value!r} is not a number") from None
    return params


def _load(args):
    if bool(args.builtin) == bool(args.input):
        raise CliError("give exactly one of --builtin or --input")
    if args.builtin:
        return builtin_example(args.builtin, **_parse_params(args.param))
    if args.param:
        raise CliError("--param applies to --builtin only")
    return load_document(args.input)


def _emit(args, filename, text):
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / filename).write_text(text)


def _out_dir(args):
    if not args.out:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _tol(value, flag):
    if value is not None and not 0 < value < 1:
        raise CliError(f"{flag} must lie in (0, 1)")
    return value


def cmd_analyze(args):
    system = system_of(_load(args))
    verdict = ctl.classify(system, _tol(args.rank_tol, "--rank-tol"), fallback=not args.no_fallback,
                           atom_tol=args.atom_tol, tol_cluster=args.cluster_tol,
                           fallback_order=args.order, fallback_count=args.grid_count)
    report = {"system": system.name or (args.input or ""), **verdict.to_dict()}
    _emit(args, "verdict.json", dumps(report))
    return STATUS_EXIT[verdict.status]


def cmd_synth(args):
    obj = _load(args)
    if not isinstance(obj, Scenario):
        raise CliError("synth needs a scenario (X0, XF, T); built-in scenarios are fig2, fig3, fig4")
    count, nt, metric, threshold = SCENARIO_DEFAULTS.get(args.builtin, GENERIC_DEFAULTS)
    count = args.grid_count or count
    nt = args.nt or nt
    metric = args.error_metric or metric
    threshold = args.threshold if args.threshold is not None else threshold
    trunc = _tol(args.trunc_rel, "--trunc-rel")
    grid = make_grid(obj.system.K, count, args.grid_scheme)
    mesh = TimeMesh(obj.T, nt)
    try:
        run = run_scenario(obj, grid, mesh, trunc, args.substeps, args.threads)
    except UnreachableTargetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    error = run.relative_sup_error if metric == "relative" else run.sup_error
    passed = error <= threshold
    summary = {
        "scenario": obj.system.name or (args.input or ""),
        "grid": {"count": count, "scheme": args.grid_scheme},
        "mesh": {"T": mesh.T, "Nt": mesh.Nt},
        "synthesis": run.synthesis.summary(),
        "errors": {"sup_error": run.sup_error, "l2_error": run.l2_error,
                   "relative_sup_error": run.relative_sup_error},
        "metric": metric,
        "threshold": threshold,
        "passed": passed,
    }
    _emit(args, "summary.json", dumps(summary))
    out = _out_dir(args)
    if out is not None:
        (out / "errors.json").write_text(dumps(run.error_summary()))
        if not args.no_csv:
            with open(out / "control.csv", "w", newline="") as fh:
                run.synthesis.control.write_csv(fh)
            with open(out / "trajectory.csv", "w", newline="") as fh:
                run.trajectory.write_csv(fh)
    return EXIT_OK if passed else EXIT_UNREACHABLE


def cmd_reach(args):
    obj = _load(args)
    system = system_of(obj)
    grid = make_grid(system.K, args.grid_count, args.grid_scheme)
    use_scenario = isinstance(obj, Scenario) and args.target != "canary"
    if args.target == "scenario" and not isinstance(obj, Scenario):
        raise CliError("--target scenario needs a scenario input")
    target = compute_xi(obj, grid) if use_scenario else canary_target(system, grid)
    N = args.order
    basis = build_generators(system, grid, N)
    orders = sorted({0, N // 4, N // 2, (3 * N) // 4, N})
    rows = [numeric_reachability_test(basis.truncated(o), target, args.reg).to_dict() for o in orders]
    reachable = rows[-1]["residual_sup"] <= args.threshold
    report = {
        "system": system.name or (args.input or ""),
        "target": "scenario displacement" if use_scenario else "cos(beta + i)",
        "grid": {"count": args.grid_count, "scheme": args.grid_scheme},
        "table": rows,
        "threshold": args.threshold,
        "reachable": reachable,
    }
    _emit(args, "reach.json", dumps(report))
    return EXIT_OK if reachable else EXIT_UNREACHABLE


def cmd_example(args):
    name = args.name or args.builtin
    if not name:
        raise CliError("give --name")
    obj = builtin_example(name, **_parse_params(args.param))
    doc = {"name": name, **to_document(obj)}
    _emit(args, f"{name}.json", dumps(doc))
    return EXIT_OK


def _add_source(p):
    p.add_argument("--builtin", help=f"built-in example: {', '.join(BUILTINS)}")
    p.add_argument("--input", help="system or scenario JSON file")
    p.add_argument("--param", action="append", metavar="K=V", help="built-in parameter, repeatable")
    p.add_argument("--out", help="output directory")


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="ensemblectl", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="classify ensemble controllability", formatter_class=fmt)
    _add_source(p)
    p.add_argument("--rank-tol", type=float, default=None,
                   help="relative rank tolerance (default 1e-10 * max(rows, cols))")
    p.add_argument("--atom-tol", type=float, default=None,
                   help="endpoint tolerance for spectrum atoms (default 1e-9 * max|endpoint|)")
    p.add_argument("--cluster-tol", type=float, default=None,
                   help="eigenvalue clustering tolerance (default 1e-8 * ||A0||)")
    p.add_argument("--no-fallback", action="store_true", help="skip the numeric check for complex spectra")
    p.add_argument("--order", type=int, default=30, help="generator order for the fallback check")
    p.add_argument("--grid-count", type=int, default=33, help="grid size for the fallback check")
    p.add_argument("--threads", type=int, default=1, help="accepted for interface symmetry")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synth", help="minimum-energy control and simulation", formatter_class=fmt)
    _add_source(p)
    p.add_argument("--grid-count", type=int, default=None, help="parameter samples (scenario default)")
    p.add_argument("--grid-scheme", choices=["uniform", "chebyshev"], default="uniform")
    p.add_argument("--nt", type=int, default=None, help="control intervals (scenario default)")
    p.add_argument("--trunc-rel", type=float, default=DEFAULT_TRUNC_REL, help="relative SVD truncation")
    p.add_argument("--substeps", type=int, default=DEFAULT_SUBSTEPS, help="trajectory samples per interval")
    p.add_argument("--error-metric", choices=["absolute", "relative"], default=None,
                   help="sup error measure tested against --threshold (scenario default)")
    p.add_argument("--threshold", type=float, default=None, help="acceptable sup error (scenario default)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for operator assembly")
    p.add_argument("--no-csv", action="store_true", help="skip control and trajectory CSV files")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("reach", help="numeric reachability residuals", formatter_class=fmt)
    _add_source(p)
    p.add_argument("--order", type=int, default=30, help="maximum generator power N")
    p.add_argument("--grid-count", type=int, default=33)
    p.add_argument("--grid-scheme", choices=["uniform", "chebyshev"], default="chebyshev")
    p.add_argument("--target", choices=["auto", "scenario", "canary"], default="auto",
                   help="scenario displacement or the generic cos(beta + i) target")
    p.add_argument("--reg", type=float, default=0.0, help="ridge regularization")
    p.add_argument("--threshold", type=float, default=1e-3, help="sup residual counted as reachable")
    p.add_argument("--threads", type=int, default=1, help="accepted for interface symmetry")
    p.set_defaults(func=cmd_reach)

    p = sub.add_parser("example", help="write a built-in example as JSON", formatter_class=fmt)
    p.add_argument("--name", help=f"one of: {', '.join(BUILTINS)}")
    p.add_argument("--builtin", help=argparse.SUPPRESS)
    p.add_argument("--param", action="append", metavar="K=V")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_example)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (CliError, UnknownExampleError, EnsembleError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
