"""``sgkit`` command line: ``solve``, ``sweep`` and ``history`` subcommands."""
from __future__ import annotations

import argparse
import os
import sys

from .bench import (
    CONFIG_KEYS,
    METHODS,
    ExperimentConfig,
    load_config_file,
    residual_history,
    run_single,
    run_sweep,
    write_results_csv,
)

_FLAG_KEYS = {
    "model": "--model",
    "dim": "--dim",
    "order": "--order",
    "sigma": "--sigma",
    "L": "--L",
    "mesh": "--mesh",
    "w": "--w",
    "tol": "--tol",
    "inner_tol": "--inner-tol",
    "methods": "--methods",
    "seed": "--seed",
    "max_iter": "--max-iter",
    "max_outer": "--max-outer",
    "restart": "--restart",
    "mean": "--mean",
    "coeff_order": "--coeff-order",
}


def _add_common(p):
    p.add_argument("--config", help="key=value configuration file")
    for key, flag in _FLAG_KEYS.items():
        names = [flag] if flag == f"--{key}" else [flag, f"--{key}"]
        p.add_argument(*names, dest=key, default=None, metavar=key.upper())
    p.add_argument("--out", default=None, help="output file (solve/sweep) or directory (history)")
    p.add_argument("--export-matrices", default=None, metavar="DIR", help="write K_i as Matrix Market")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sgkit", description="Stochastic Galerkin solver benchmarks"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("solve", help="run every method on one configuration"))
    sweep = sub.add_parser("sweep", help="vary one parameter")
    _add_common(sweep)
    sweep.add_argument("--axis", required=True, choices=["dim", "order", "sigma"])
    sweep.add_argument("--values", required=True, nargs="+")
    sweep.add_argument("--procs", type=int, default=1)
    _add_common(sub.add_parser("history", help="residual history per method"))
    return parser


def config_from_args(args):
    overrides = load_config_file(args.config) if args.config else {}
    for key in _FLAG_KEYS:
        raw = getattr(args, key)
        if raw is not None:
            attr, cast = CONFIG_KEYS[key]
            overrides[attr] = cast(raw)
    return ExperimentConfig(**overrides)


def _print_row(row, stream):
    c = row.config
    print(
        f"model={c.model} M={c.M} p={c.p} sigma={c.sigma:g} mesh={c.mesh[0]}x{c.mesh[1]} "
        f"n_basis={row.n_basis} n_x={row.n_x}",
        file=stream,
    )
    for m, r in row.results.items():
        print(
            f"  {m:<14s} iters={r.iterations:<5d} {r.status:<13s} "
            f"scaled_time={r.scaled_time:9.2f} matvecs={r.matvec_count:<8d} "
            f"rel_diff={r.rel_diff:.2e}",
            file=stream,
        )


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ValueError, OSError) as exc:
        print(f"sgkit: {exc}", file=sys.stderr)
        return 2
    if args.command == "solve":
        row = run_single(cfg, export_matrices=args.export_matrices)
        _print_row(row, sys.stdout)
        if args.out:
            write_results_csv([row], args.out)
    elif args.command == "sweep":
        rows = run_sweep(cfg, args.axis, args.values, out=args.out, n_procs=args.procs)
        for row in rows:
            _print_row(row, sys.stdout)
    else:
        out_dir = args.out or "."
        hist, row = residual_history(cfg, out_dir)
        _print_row(row, sys.stdout)
        print(f"histories written to {os.path.abspath(out_dir)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
