"""Command-line front end.

Exit codes
----------
0  success
1  ``oracle-check`` found a failing case
2  usage error or malformed problem file
3  numerical precondition failed (no PD covariance, singular matrix, ...)
4  the solver did not converge (the result is still printed)

The default tolerance for ``barycenter``, ``bench`` and ``logdecay`` is
1e-10 and can be overridden with the ``WASSBARY_TOL`` environment variable.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import warnings

import numpy as np

from . import __version__
from .bench import (
    BenchConfig,
    fit_linear,
    log_decrease_series,
    middle_fraction,
    run_wishart_benchmark,
    wishart_problem,
    write_bench_csv,
    write_logdecay_csv,
)
from .errors import DimMismatch, InvalidProblem, MathError, MaxIterExceeded, TooShort
from .fixpoint import IterationConfig, solve
from .gausswass import optimal_map_matrix, w2_gaussian_squared
from .oracle import run_oracle_checks
from .problemfile import load_problem, result_to_json

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_MATH = 3
EXIT_NOT_CONVERGED = 4

TOL_ENV = "WASSBARY_TOL"
TRACE_HEADER = ("n", "v", "delta_v", "trace", "log_det", "residual")


class UsageError(Exception):
    pass


def default_tol() -> float:
    raw = os.environ.get(TOL_ENV)
    if raw is None:
        return 1e-10
    try:
        tol = float(raw)
    except ValueError:
        raise UsageError(f"{TOL_ENV}={raw!r} is not a number") from None
    if not tol > 0:
        raise UsageError(f"{TOL_ENV} must be positive")
    return tol


def _int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return values


def _variant_list(text: str) -> list[str]:
    values = [x.strip().lower() for x in text.split(",") if x.strip()]
    if not values or any(v not in ("paper", "ru") for v in values):
        raise argparse.ArgumentTypeError(f"variants must be from paper,ru; got {text!r}")
    return values


def _random_spec(text: str) -> dict:
    spec = {}
    for part in text.split(","):
        key, sep, value = part.partition("=")
        if not sep or key.strip() not in ("d", "k", "seed"):
            raise argparse.ArgumentTypeError(f"expected d=..,k=..,seed=..; got {text!r}")
        try:
            spec[key.strip()] = int(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{key} must be an integer") from None
    if set(spec) != {"d", "k", "seed"}:
        raise argparse.ArgumentTypeError("--random needs d, k and seed")
    return spec


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2) + "\n")


def _iteration_config(args, dim: int) -> IterationConfig:
    tol = args.tol if args.tol is not None else default_tol()
    s0 = args.s0
    if s0 not in ("identity", "first"):
        try:
            values = np.array([float(x) for x in s0.split(",")])
        except ValueError:
            raise UsageError("--s0 must be identity, first, or comma-separated row-major entries") from None
        if values.size != dim * dim:
            raise UsageError(f"--s0 needs {dim * dim} entries, got {values.size}")
        s0 = values.reshape(dim, dim)
    try:
        return IterationConfig(tol=tol, max_iter=args.max_iter, variant=args.variant, s0=s0)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# --------------------------------------------------------------------------
# commands


def cmd_distance(args) -> int:
    spec = load_problem(args.file)
    if len(spec.measures) != 2:
        raise InvalidProblem(f"distance needs exactly two measures, got {len(spec.measures)}")
    p, q = spec.measures
    w2sq = w2_gaussian_squared(p, q)
    a = optimal_map_matrix(p.cov, q.cov)
    _emit({"w2": float(np.sqrt(w2sq)), "w2_squared": w2sq, "map_matrix": [float(x) for x in a.reshape(-1)]})
    return EXIT_OK


def _write_trace(trace, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(TRACE_HEADER) + "\n")
        for r in trace.records:
            cells = [str(r.n)] + [
                "" if x is None else format(float(x), ".17g") for x in (r.v, r.delta_v, r.trace, r.log_det, r.residual)
            ]
            fh.write(",".join(cells) + "\n")


def cmd_barycenter(args) -> int:
    spec = load_problem(args.file)
    problem = spec.to_problem()
    config = _iteration_config(args, spec.dim)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaxIterExceeded)
        result, trace = solve(problem, config)
    if spec.family != "gaussian":
        result = dataclasses.replace(result, family=spec.family)
    if args.trace_out:
        _write_trace(trace, args.trace_out)
    _emit(result_to_json(result))
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_bench(args) -> int:
    tol = args.tol if args.tol is not None else default_tol()
    try:
        config = BenchConfig(
            dims=tuple(args.dims),
            ks=tuple(args.ks),
            replicates=args.replicates,
            seed=args.seed,
            tol=tol,
            variants=tuple(args.variants),
            max_iter=args.max_iter,
            workers=args.workers,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    cells = run_wishart_benchmark(config)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_bench_csv(cells, fh)
        for c in cells:
            print(
                f"d={c.d:<3d} k={c.k:<3d} {c.variant:<5s} mean_iter={c.mean_iter:8.3f} "
                f"sd={c.stdev_iter:7.3f} failures={c.failures}/{c.replicates}"
            )
        print(f"wrote {args.out}")
    else:
        write_bench_csv(cells, sys.stdout)
    if any(c.failures for c in cells):
        print("warning: some replicates did not converge", file=sys.stderr)
    return EXIT_OK


def cmd_logdecay(args) -> int:
    if (args.file is None) == (args.random is None):
        raise UsageError("logdecay needs exactly one of FILE or --random d=..,k=..,seed=..")
    if args.random is not None:
        problem = wishart_problem(args.random["seed"], args.random["d"], args.random["k"], 0)
    else:
        problem = load_problem(args.file).to_problem()
    tol = args.tol if args.tol is not None else default_tol()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaxIterExceeded)
        series = log_decrease_series(problem, IterationConfig(tol=tol, max_iter=args.max_iter))

    summary: dict = {"n_points": len(series)}
    if len(series) <= 1:
        # at most one productive step: the start was already at, or one step from, the barycenter
        summary["message"] = "converged immediately"
    else:
        try:
            slope, intercept, r2 = fit_linear(middle_fraction(series, 0.8))
            summary.update(slope=slope, intercept=intercept, r2=r2, fit_window="middle 80%")
        except TooShort:
            summary["message"] = "series too short to fit"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_logdecay_csv(series, fh)
        _emit(summary)
    else:
        write_logdecay_csv(series, sys.stdout)
        sys.stderr.write(json.dumps(summary) + "\n")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    outcomes = run_oracle_checks(args.cases, args.seed, args.perturb)
    failed = [o for o in outcomes if not o.passed]
    for o in failed:
        _emit(
            {"case": o.index, "kind": o.kind, "error": o.error, "tolerance": o.tolerance, "inputs": o.inputs}
        )
    print(f"oracle-check: {len(outcomes) - len(failed)}/{len(outcomes)} passed")
    return EXIT_CHECK_FAILED if failed else EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wassbary", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("distance", help="W2 distance and optimal map between two measures")
    p.add_argument("file")
    p.set_defaults(func=cmd_distance)

    def add_solver_flags(p):
        p.add_argument("--tol", type=float, default=None, help=f"V-decrease tolerance (default 1e-10 or ${TOL_ENV})")
        p.add_argument("--max-iter", type=int, default=5000)

    p = sub.add_parser("barycenter", help="solve for the barycenter of a problem file")
    p.add_argument("file")
    add_solver_flags(p)
    p.add_argument("--variant", choices=("paper", "ru"), default="paper")
    p.add_argument("--s0", default="identity", help="identity, first, or row-major entries")
    p.add_argument("--trace-out", default=None, help="write per-step diagnostics CSV here")
    p.set_defaults(func=cmd_barycenter)

    p = sub.add_parser("bench", help="Wishart iteration-count benchmark")
    p.add_argument("--dims", type=_int_list, default=[2, 3, 5, 10])
    p.add_argument("--ks", type=_int_list, default=[2, 3, 5])
    p.add_argument("--replicates", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variants", type=_variant_list, default=["paper", "ru"])
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="CSV output path (default: stdout)")
    add_solver_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("logdecay", help="log10 of the per-step V decrease, with a linear fit")
    p.add_argument("file", nargs="?")
    p.add_argument("--random", type=_random_spec, default=None, metavar="d=D,k=K,seed=S")
    p.add_argument("--out", default=None, help="CSV output path (default: stdout, summary on stderr)")
    add_solver_flags(p)
    p.set_defaults(func=cmd_logdecay)

    p = sub.add_parser("oracle-check", help="randomized cross-checks against independent oracles")
    p.add_argument("--cases", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--perturb", type=float, default=0.0, help="inject an error (negative control)")
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, InvalidProblem, DimMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MathError, ArithmeticError) as exc:
        print(f"math error: {exc}", file=sys.stderr)
        return EXIT_MATH


if __name__ == "__main__":
    sys.exit(main())
