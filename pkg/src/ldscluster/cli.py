"""Command-line entry point.

Subcommands:
  generate   write a synthetic dataset to a directory
  cluster    cluster one dataset directory with a chosen method
  benchmark  run a full experiment from a JSON config
  oracle     exact exhaustive clustering of a small dataset

Exit codes: 0 success, 1 usage error, 2 data/config error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .baselines import baseline_cluster
from .cluster import EmOptions, em_cluster, oracle_cluster
from .core import load_dataset, save_dataset
from .data import SyntheticSpec, default_models, generate_synthetic
from .fit import FitOptions
from .harness import load_config, run_experiment
from .metrics import f1_pair

__all__ = ["main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; remap to the documented 1.
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="ldscluster",
                     description="Joint time-series clustering and LDS identification.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic dataset")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, metavar="DIR")
    gen.add_argument("--clusters", type=int, default=2, metavar="K")
    gen.add_argument("--hidden-dim", type=int, default=2)
    gen.set_defaults(func=_cmd_generate)

    clu = sub.add_parser("cluster", help="cluster one dataset directory")
    clu.add_argument("data_dir", metavar="DIR")
    clu.add_argument("--method", choices=["em", "oracle", "dtw", "fft"], default="em")
    _add_solver_flags(clu)
    clu.set_defaults(func=_cmd_cluster)

    ben = sub.add_parser("benchmark", help="run an experiment from a JSON config")
    ben.add_argument("--config", required=True, metavar="PATH")
    ben.add_argument("--method", choices=["em", "oracle", "dtw", "fft"], default=None)
    ben.add_argument("--clusters", type=int, default=None, metavar="K")
    ben.add_argument("--hidden-dim", type=int, default=None)
    ben.add_argument("--window", type=int, default=None)
    ben.add_argument("--trials", type=int, default=None)
    ben.add_argument("--seed", type=int, default=None)
    ben.add_argument("--out", default=None, metavar="DIR")
    ben.add_argument("--max-iters", type=int, default=None)
    ben.add_argument("--tol", type=float, default=None)
    ben.add_argument("--restarts", type=int, default=None)
    ben.set_defaults(func=_cmd_benchmark)

    orc = sub.add_parser("oracle", help="exact clustering of a small dataset")
    orc.add_argument("data_dir", metavar="DIR")
    _add_solver_flags(orc)
    orc.set_defaults(func=_cmd_oracle)
    return parser


def _add_solver_flags(sub):
    sub.add_argument("--clusters", type=int, default=2, metavar="K")
    sub.add_argument("--hidden-dim", type=int, default=2)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--max-iters", type=int, default=None)
    sub.add_argument("--tol", type=float, default=None)
    sub.add_argument("--restarts", type=int, default=None)


def _fit_options(args) -> FitOptions:
    kwargs = {"hidden_dim": args.hidden_dim}
    if args.max_iters is not None:
        kwargs["max_outer_iters"] = args.max_iters
    if args.tol is not None:
        kwargs["rel_tol"] = args.tol
    if args.restarts is not None:
        kwargs["restarts"] = args.restarts
    return FitOptions(**kwargs)


def _cmd_generate(args) -> int:
    models = default_models(k=args.clusters, n=args.hidden_dim)
    spec = SyntheticSpec(cluster_models=models, seed=args.seed)
    dataset = generate_synthetic(spec)
    save_dataset(dataset, args.out)
    print(f"wrote {len(dataset)} trajectories "
          f"({args.clusters} clusters x {len(spec.cov_grid) ** 2} covariance combos) "
          f"to {args.out}")
    return 0


def _print_result(dataset, labels, objective=None):
    print("assignment:", " ".join(str(v) for v in labels))
    if objective is not None:
        print(f"objective: {objective!r}")
    truth = [x.true_label for x in dataset]
    if all(t is not None for t in truth):
        k = max(max(labels), max(truth)) + 1
        print(f"f1: {f1_pair(np.asarray(labels), np.asarray(truth), max(k, 2))!r}")


def _cmd_cluster(args) -> int:
    dataset = load_dataset(args.data_dir)
    if args.method in ("dtw", "fft"):
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, 3]))
        assignment = baseline_cluster(dataset, args.clusters, args.method, rng)
        _print_result(dataset, assignment.to_list())
        return 0
    opts = _fit_options(args)
    if args.method == "oracle":
        result = oracle_cluster(dataset, args.clusters, opts, seed=args.seed)
    else:
        result = em_cluster(dataset, args.clusters, opts, EmOptions(), seed=args.seed)
    _print_result(dataset, result.assignment.to_list(), result.joint_objective)
    return 0


def _cmd_oracle(args) -> int:
    dataset = load_dataset(args.data_dir)
    result = oracle_cluster(dataset, args.clusters, _fit_options(args), seed=args.seed)
    _print_result(dataset, result.assignment.to_list(), result.joint_objective)
    return 0


def _cmd_benchmark(args) -> int:
    overrides = {
        "trials": args.trials,
        "base_seed": args.seed,
        "out_dir": args.out,
        "k": args.clusters,
        "methods": [args.method] if args.method else None,
        "hidden_dims": [args.hidden_dim] if args.hidden_dim else None,
        "windows": [args.window] if args.window else None,
        "max_outer_iters": args.max_iters,
        "rel_tol": args.tol,
        "restarts": args.restarts,
    }
    config = load_config(args.config, overrides)
    records, stats = run_experiment(config)
    errors = sum(1 for r in records if r.error is not None)
    print(f"{len(records)} rows -> {config.out_dir} ({errors} errors)")
    for (method, dataset, n, t_len), ts in stats.items():
        print(f"  {method} {dataset} n={n} T={t_len}: "
              f"f1 {ts.mean:.4f} +/- {ts.ci_half_width:.4f} ({ts.n_trials} trials)")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
