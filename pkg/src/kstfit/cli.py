"""Command-line interface; every subcommand emits CSV to stdout or --out.

The cache directory resolves from --cache-dir, then the KST_CACHE_DIR
environment variable; with neither, nothing is cached.  A JSON file of
argument defaults can be supplied via --config.
"""

import argparse
import json
import os
import sys

import numpy as np

from .bench import (ExperimentSpec, get_basis_set, pivotal_count_experiment,
                    run_knet_rate, run_slope_experiment, run_table_experiment)
from .fitting import dls_fit, evaluate_fit, omp_fit
from .kb import PointSet
from .pivotal import pivotal_fit
from .testfuncs import get as get_function

FULL_SWEEP_2D = (100, 200, 400, 1000, 10000)
SHORT_SWEEP = (100, 200, 400, 1000)


def _int_list(text):
    return tuple(int(tok) for tok in text.split(",") if tok)


def _make_parser():
    top = argparse.ArgumentParser(
        prog="kstfit",
        description="superposition spline bases, least-squares fits and "
                    "pivotal point sets")
    top.add_argument("--config", help="JSON file with argument defaults")
    sub = top.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--d", type=int, default=2)
        p.add_argument("--grid", type=int, default=41,
                       help="fit-grid points per axis")
        p.add_argument("--eval-grid", type=int, default=0,
                       help="evaluation-grid points per axis (0 = default)")
        p.add_argument("--degree", type=int, default=3)
        p.add_argument("--lambda-pen", type=float, default=1.0,
                       dest="lambda_pen")
        p.add_argument("--segments", type=int, default=0,
                       help="smoothing segments per axis (0 = default)")
        p.add_argument("--cache-dir", default=None)
        p.add_argument("--out", default=None,
                       help="write output here instead of stdout")

    p = sub.add_parser("build-basis", help="build (and cache) one basis set")
    common(p)
    p.add_argument("--n", type=int, required=True)

    p = sub.add_parser("fit", help="fit one benchmark function")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--function", required=True)
    p.add_argument("--method", choices=("dls", "pivotal", "omp"),
                   default="dls")
    p.add_argument("--sparsity", type=int, default=0)

    p = sub.add_parser("table", help="RMSE table over all functions")
    common(p)
    p.add_argument("--n-list", type=_int_list, default=None)
    p.add_argument("--full", action="store_true",
                   help="extend the 2-d sweep to n=10000")

    p = sub.add_parser("slopes", help="convergence slope of one function")
    common(p)
    p.add_argument("--function", required=True)
    p.add_argument("--n-list", type=_int_list, default=None)
    p.add_argument("--method", choices=("dls", "pivotal"), default="dls")
    p.add_argument("--full", action="store_true")

    p = sub.add_parser("pivotal-count", help="pivotal set size against n")
    common(p)
    p.add_argument("--n-list", type=_int_list, default=None)

    p = sub.add_parser("knet-rate", help="network approximation-rate sweep")
    common(p)
    p.add_argument("--g", default="sin",
                   choices=("sin", "sqrt", "linear", "exp", "chirp"))
    p.add_argument("--n-list", type=_int_list,
                   default=(8, 16, 32, 64, 128, 256, 512))
    return top


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _spec(args, n_list):
    cache_dir = args.cache_dir or os.environ.get("KST_CACHE_DIR")
    return ExperimentSpec(d=args.d, n_list=tuple(n_list),
                          fit_grid=args.grid, eval_grid=args.eval_grid,
                          degree=args.degree, penalty=args.lambda_pen,
                          segments=args.segments, cache_dir=cache_dir)


def _default_sweep(args):
    if args.n_list:
        return args.n_list
    if args.d == 2 and getattr(args, "full", False):
        return FULL_SWEEP_2D
    return SHORT_SWEEP


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    pre_args, _ = pre.parse_known_args(argv)
    parser = _make_parser()
    if pre_args.config:
        # config supplies defaults; explicit command-line flags still win
        with open(pre_args.config) as fh:
            defaults = json.load(fh)
        if "n_list" in defaults:
            defaults["n_list"] = tuple(defaults["n_list"])
        parser.set_defaults(**defaults)
        for action in parser._subparsers._group_actions:
            for sub_parser in action.choices.values():
                sub_parser.set_defaults(**defaults)
    args = parser.parse_args(argv)

    if args.command == "build-basis":
        spec = _spec(args, [args.n])
        basis = get_basis_set(args.d, args.n, cache_dir=spec.cache_dir,
                              fit_grid=args.grid, degree=args.degree,
                              penalty=args.lambda_pen,
                              segments=args.segments or None)
        locs = basis.pivotal_points
        lines = [f"# d={args.d} n={args.n} rank={basis.rank} "
                 f"columns={basis.matrix.shape[1]}"]
        lines += [",".join(f"{c:.6f}" for c in row) for row in locs]
        _emit("\n".join(lines) + "\n", args.out)
        return 0

    if args.command == "fit":
        spec = _spec(args, [args.n])
        res = spec.resolved()
        basis = get_basis_set(args.d, args.n, cache_dir=spec.cache_dir,
                              fit_grid=args.grid, degree=args.degree,
                              penalty=args.lambda_pen,
                              segments=args.segments or None)
        func = get_function(args.d, args.function)
        target = func(basis.grid.points)
        if args.method == "dls":
            fit = dls_fit(basis.matrix, target)
        elif args.method == "pivotal":
            fit = pivotal_fit(basis.matrix, basis.rows, basis.cols,
                              target[basis.rows])
        else:
            fit = omp_fit(basis.matrix, target,
                          sparsity=args.sparsity or basis.rank)
        eval_pts = PointSet.grid(args.d, res["eval_grid"])
        evaluate_fit(fit, basis.lkb, eval_pts, func)
        if args.out:
            fit.save_json(args.out)
        sys.stdout.write(
            f"function,method,training_rmse,eval_rmse\n"
            f"{args.function},{args.method},{fit.training_rmse:.3e},"
            f"{fit.eval_rmse:.3e}\n")
        return 0

    if args.command == "table":
        spec = _spec(args, _default_sweep(args))
        _emit(run_table_experiment(spec), args.out)
        return 0

    if args.command == "slopes":
        spec = _spec(args, _default_sweep(args))
        csv, slope, label, _ = run_slope_experiment(spec, args.function,
                                                    method=args.method)
        _emit(csv, args.out)
        return 0

    if args.command == "pivotal-count":
        spec = _spec(args, _default_sweep(args))
        csv, _, _ = pivotal_count_experiment(spec)
        _emit(csv, args.out)
        return 0

    if args.command == "knet-rate":
        csv, _ = run_knet_rate(args.d, args.g, args.n_list)
        _emit(csv, args.out)
        return 0

    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
