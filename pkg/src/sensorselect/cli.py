"""Command-line interface.

Verbs: select, benchmark-random, lambda-sweep, crossval, pod.  Reports are
UTF-8 CSV (with a sibling .aggregates file) or JSON carrying a
schema-version field.  SSK_THREADS caps trial-level parallelism.
"""

import argparse
import json
import sys

import numpy as np

from . import admm, bench, data
from .errors import SensorSelectError


def _add_common(sub):
    sub.add_argument("--output", required=True, help="report file path")
    sub.add_argument("--format", choices=("csv", "json"), default="csv")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--gamma", type=float, default=0.4, help="ADMM step size")


def _add_problem_source(sub):
    src = sub.add_mutually_exclusive_group(required=True)
    src.add_argument("--n", type=int, help="random problem size")
    src.add_argument("--input", help="snapshot matrix file (csv or binary)")
    sub.add_argument("--r", type=int, required=True, help="latent dimension")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sensorselect",
        description="A-optimal sparse sensor selection (ADMM, greedy, convex)",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sel = subs.add_parser("select", help="run one method once")
    _add_problem_source(sel)
    _add_common(sel)
    sel.add_argument("--method", required=True, choices=bench.METHODS)
    sel.add_argument("--p", type=int, help="target sensor count")
    sel.add_argument("--lambda", dest="lam", type=float,
                     help="sparsity weight for admm-bst/bht (overrides --p search)")
    sel.add_argument("--kappa", type=float, help="barrier weight for convex")
    sel.add_argument("--trace", action="store_true",
                     help="emit per-iteration history CSV next to the report")

    br = subs.add_parser("benchmark-random", help="random-matrix study")
    br.add_argument("--n", type=int, required=True)
    br.add_argument("--r", type=int, required=True)
    _add_common(br)
    br.add_argument("--method", action="append", required=True,
                    choices=bench.METHODS, help="repeatable")
    br.add_argument("--p", type=int, action="append", required=True,
                    help="repeatable sensor counts")
    br.add_argument("--trials", type=int, default=1)

    ls = subs.add_parser("lambda-sweep", help="selected count vs sparsity weight")
    ls.add_argument("--n", type=int, required=True)
    ls.add_argument("--r", type=int, required=True)
    _add_common(ls)
    ls.add_argument("--method", required=True, choices=("admm-bst", "admm-bht"))
    ls.add_argument("--lambda", dest="lambdas", type=float, action="append",
                    required=True, help="repeatable sweep values")
    ls.add_argument("--trials", type=int, default=1)

    cv = subs.add_parser("crossval", help="cross-validated reconstruction study")
    cv.add_argument("--input", required=True)
    cv.add_argument("--r", type=int, required=True)
    _add_common(cv)
    cv.add_argument("--method", action="append", required=True,
                    choices=bench.METHODS)
    cv.add_argument("--p", type=int, action="append", required=True)
    cv.add_argument("--folds", type=int, default=5)

    pod = subs.add_parser("pod", help="standalone truncated-SVD reduction")
    pod.add_argument("--input", required=True)
    pod.add_argument("--r", type=int, required=True)
    pod.add_argument("--output", required=True,
                     help="modes written as CSV (rows = kept locations)")

    return parser


def _progress(msg):
    print(msg, file=sys.stderr, flush=True)


def _cmd_select(args):
    if args.n is not None:
        spec = data.RandomProblemSpec(n=args.n, r=args.r, seed=args.seed, trials=1)
        U = data.random_candidates(spec)[0]
    else:
        dataset = data.load_snapshots(args.input)
        U = data.pod_reduce(dataset, args.r).modes
    if args.p is None and args.lam is None:
        raise SensorSelectError("select needs --p or --lambda")
    admm_kwargs = {"keep_history": True} if args.trace else None
    rec = bench.run_method(args.method, U, args.p, gamma=args.gamma,
                           lam=args.lam, kappa=args.kappa,
                           admm_kwargs=admm_kwargs)
    rec["seed"] = args.seed
    if rec["error"]:
        print("error: %s" % rec["error"], file=sys.stderr)
        return 1
    with open(args.output, "w", encoding="utf-8") as fh:
        json.dump({"schema_version": bench.SCHEMA_VERSION, "kind": "select",
                   "record": rec}, fh, indent=2, default=bench._json_default)
    csv_path = args.output + ".selection.csv"
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("sensor_index\n")
        for idx in rec["selection"]:
            fh.write("%d\n" % idx)
    print("selected %d sensors, trace %.6g -> %s"
          % (rec["p_selected"], rec["trace"], args.output))
    return 0


def _report_exit(report, methods):
    completed = {row["method"] for row in report["rows"] if not row["error"]}
    return 0 if all(m in completed for m in methods) else 1


def _cmd_benchmark_random(args):
    spec = data.RandomProblemSpec(n=args.n, r=args.r, seed=args.seed,
                                  trials=args.trials)
    report = bench.benchmark_random(spec, args.method, args.p,
                                    gamma=args.gamma, progress=_progress)
    bench.write_report(report, args.output, args.format)
    return _report_exit(report, args.method)


def _cmd_lambda_sweep(args):
    spec = data.RandomProblemSpec(n=args.n, r=args.r, seed=args.seed,
                                  trials=args.trials)
    kind = args.method.replace("admm-", "")
    report = bench.lambda_sweep_report(spec, kind, args.lambdas,
                                       gamma=args.gamma, progress=_progress)
    bench.write_report(report, args.output, args.format)
    return 0


def _cmd_crossval(args):
    dataset = data.load_snapshots(args.input)
    report = bench.crossval(dataset, args.r, args.method, args.p,
                            folds=args.folds, gamma=args.gamma,
                            progress=_progress)
    bench.write_report(report, args.output, args.format)
    return _report_exit(report, args.method)


def _cmd_pod(args):
    dataset = data.load_snapshots(args.input)
    basis = data.pod_reduce(dataset, args.r)
    np.savetxt(args.output, basis.modes, delimiter=",", fmt="%.17g")
    np.savetxt(args.output + ".singular_values.csv", basis.singular_values,
               delimiter=",", fmt="%.17g")
    print("wrote %d x %d mode matrix -> %s"
          % (basis.modes.shape[0], basis.modes.shape[1], args.output))
    return 0


_DISPATCH = {
    "select": _cmd_select,
    "benchmark-random": _cmd_benchmark_random,
    "lambda-sweep": _cmd_lambda_sweep,
    "crossval": _cmd_crossval,
    "pod": _cmd_pod,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except SensorSelectError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
