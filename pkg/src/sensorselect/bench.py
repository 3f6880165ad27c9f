"""Benchmark harness: runs selections, sweeps, cross-validation, and timing
studies, and emits machine-readable CSV/JSON reports.

Every aggregate in a report is recomputed from the emitted per-trial rows
and cross-checked before writing; normalized-vs-greedy ratios always use the
greedy run on the identical trial matrix.  Trial-level parallelism is capped
by the SSK_THREADS environment variable (default: sequential).
"""

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import admm, data, greedy, prox, relax
from .core import SensorSelection, a_optimality, select_rows
from .errors import InvalidParameterError, SensorSelectError

SCHEMA_VERSION = 1

ADMM_METHODS = {
    "admm-bst": prox.BST,
    "admm-bht": prox.BHT,
    "admm-l0bht": prox.L0BHT,
}
METHODS = tuple(ADMM_METHODS) + ("greedy", "convex")


def thread_count():
    try:
        return max(1, int(os.environ.get("SSK_THREADS", "1")))
    except ValueError:
        return 1


def _map_trials(fn, items):
    workers = thread_count()
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run_method(method, U, p, gamma=0.4, lam=None, kappa=None,
               admm_kwargs=None, relax_kwargs=None):
    """Run one selection method on one candidate matrix.

    Returns a record dict with the selection, polished trace, wall time,
    and solver metadata.  admm-bst/bht use the given lam directly when
    supplied, otherwise bisect the sparsity weight to hit p sensors.
    """
    if method not in METHODS:
        raise InvalidParameterError("unknown method %r" % (method,))
    U = np.asarray(U, dtype=float)
    admm_kwargs = dict(admm_kwargs or {})
    relax_kwargs = dict(relax_kwargs or {})
    rec = {
        "method": method, "n": U.shape[0], "r": U.shape[1], "p_target": p,
        "p_selected": 0, "trace": math.inf, "wall_time": math.nan,
        "iterations": 0, "converged": False, "lam": lam, "error": "",
    }
    t0 = time.perf_counter()
    try:
        if method == "greedy":
            sel = greedy.greedy_select(U, greedy.GreedyConfig(p=p))
            rec["converged"] = True
        elif method == "convex":
            sel, _z, steps = relax.relax_select(U, p, kappa=kappa, **relax_kwargs)
            rec["iterations"] = steps
            rec["converged"] = True
        else:
            kind = ADMM_METHODS[method]
            if kind == prox.L0BHT:
                problem = admm.AdmmProblem(
                    A=np.ascontiguousarray(U.T),
                    penalty=admm.SparsityPenalty(kind, p=p),
                    gamma=gamma, **admm_kwargs,
                )
                report = admm.solve(problem, U)
            elif lam is not None:
                problem = admm.AdmmProblem(
                    A=np.ascontiguousarray(U.T),
                    penalty=admm.SparsityPenalty(kind, lam=lam),
                    gamma=gamma, **admm_kwargs,
                )
                report = admm.solve(problem, U)
            else:
                report, lam_used = admm.solve_for_target_count(
                    U, kind, p, gamma=gamma, count_tolerance=1, **admm_kwargs
                )
                rec["lam"] = lam_used
            sel = report.selection
            rec["iterations"] = report.iterations_used
            rec["converged"] = report.converged
        rec["p_selected"] = sel.p
        rec["selection"] = list(sel.indices)
        rec["trace"] = a_optimality(select_rows(U, sel))
    except SensorSelectError as exc:
        rec["error"] = "%s: %s" % (type(exc).__name__, exc)
        rec["selection"] = []
    rec["wall_time"] = time.perf_counter() - t0
    return rec


def _mean_std(values):
    arr = np.array([v for v in values if np.isfinite(v)], dtype=float)
    if arr.size == 0:
        return math.nan, math.nan, 0
    return float(arr.mean()), float(arr.std(ddof=1)) if arr.size > 1 else 0.0, arr.size


def aggregate_rows(rows):
    """Per-(method, p) means of trace, time, and greedy-normalized ratio.

    The normalized ratio is computed per trial against the greedy row for
    the same (trial, p), then averaged; trials without a greedy reference
    contribute no ratio.
    """
    greedy_ref = {
        (row["trial"], row["p_target"]): row["trace"]
        for row in rows if row["method"] == "greedy" and not row["error"]
    }
    groups = {}
    for row in rows:
        groups.setdefault((row["method"], row["p_target"]), []).append(row)

    aggregates = []
    for (method, p), grp in sorted(groups.items()):
        traces = [g["trace"] for g in grp if not g["error"]]
        times = [g["wall_time"] for g in grp]
        ratios = []
        for g in grp:
            ref = greedy_ref.get((g["trial"], g["p_target"]))
            if not g["error"] and ref is not None and np.isfinite(ref) and ref > 0:
                ratios.append(g["trace"] / ref)
        t_mean, t_std, t_n = _mean_std(traces)
        ratio_mean, ratio_std, ratio_n = _mean_std(ratios)
        agg = {
            "method": method, "p_target": p,
            "trials": len(grp),
            "failures": sum(1 for g in grp if g["error"]),
            "trace_mean": t_mean, "trace_std": t_std,
            "time_mean": float(np.mean(times)),
            "normalized_trace_mean": ratio_mean,
            "normalized_trace_std": ratio_std,
            "normalized_trace_n": ratio_n,
        }
        aggregates.append(agg)
    return aggregates


def benchmark_random(spec, methods, p_values, gamma=0.4, admm_kwargs=None,
                     relax_kwargs=None, progress=None):
    """Random-matrix study: every method at every p on the same trial matrix."""
    if not methods:
        raise InvalidParameterError("at least one method is required")
    for m in methods:
        if m not in METHODS:
            raise InvalidParameterError("unknown method %r" % (m,))
    matrices = data.random_candidates(spec)

    def run_trial(item):
        trial, U = item
        trial_rows = []
        for p in p_values:
            for method in methods:
                rec = run_method(method, U, p, gamma=gamma,
                                 admm_kwargs=admm_kwargs,
                                 relax_kwargs=relax_kwargs)
                rec["trial"] = trial
                trial_rows.append(rec)
        if progress:
            progress("trial %d/%d done" % (trial + 1, spec.trials))
        return trial_rows

    nested = _map_trials(run_trial, list(enumerate(matrices)))
    rows = [row for trial_rows in nested for row in trial_rows]
    return {"schema_version": SCHEMA_VERSION, "kind": "benchmark-random",
            "spec": {"n": spec.n, "r": spec.r, "seed": spec.seed,
                     "trials": spec.trials, "gamma": gamma,
                     "p_values": list(p_values), "methods": list(methods)},
            "rows": rows, "aggregates": aggregate_rows(rows)}


def lambda_sweep_report(spec, kind, lambdas, gamma=0.4, admm_kwargs=None,
                        progress=None):
    """Trial-averaged selected-sensor count per sparsity weight."""
    matrices = data.random_candidates(spec)
    admm_kwargs = dict(admm_kwargs or {})

    def run_trial(item):
        trial, U = item
        recs = admm.lambda_sweep(U, kind, lambdas, gamma=gamma, **admm_kwargs)
        for rec in recs:
            rec["trial"] = trial
            rec["kind"] = kind
        if progress:
            progress("trial %d/%d done" % (trial + 1, spec.trials))
        return recs

    nested = _map_trials(run_trial, list(enumerate(matrices)))
    rows = [row for trial_rows in nested for row in trial_rows]
    aggregates = []
    for lam in lambdas:
        counts = [r["p_selected"] for r in rows if r["lam"] == float(lam)]
        aggregates.append({
            "lam": float(lam),
            "p_selected_mean": float(np.mean(counts)),
            "empty_fraction": float(np.mean([c == 0 for c in counts])),
        })
    return {"schema_version": SCHEMA_VERSION, "kind": "lambda-sweep",
            "spec": {"n": spec.n, "r": spec.r, "seed": spec.seed,
                     "trials": spec.trials, "gamma": gamma,
                     "penalty": kind, "lambdas": [float(v) for v in lambdas]},
            "rows": rows, "aggregates": aggregates}


def crossval(dataset, r, methods, p_values, folds=5, gamma=0.4,
             admm_kwargs=None, relax_kwargs=None, progress=None):
    """Per-fold POD + selection + scoring, ensemble-averaged across folds."""
    if folds < 2:
        raise InvalidParameterError("cross-validation needs at least 2 folds")
    split = data.make_cv_splits(dataset.m, folds)
    rows = []
    for fold in range(folds):
        train = dataset.data[:, split.train_indices(fold)]
        test = dataset.data[:, split.test_indices(fold)]
        basis = data.pod_reduce(train, r)
        U = basis.modes
        for p in p_values:
            for method in methods:
                rec = run_method(method, U, p, gamma=gamma,
                                 admm_kwargs=admm_kwargs,
                                 relax_kwargs=relax_kwargs)
                rec["trial"] = fold
                rec["fold"] = fold
                if not rec["error"]:
                    try:
                        sel = SensorSelection(tuple(rec["selection"]))
                        rec["reconstruction_error"] = data.reconstruction_error(
                            basis, sel, test
                        )
                    except SensorSelectError as exc:
                        rec["error"] = "scoring: %s" % exc
                        rec["reconstruction_error"] = math.nan
                else:
                    rec["reconstruction_error"] = math.nan
                rows.append(rec)
        if progress:
            progress("fold %d/%d done" % (fold + 1, folds))

    aggregates = aggregate_rows(rows)
    for agg in aggregates:
        errs = [row["reconstruction_error"] for row in rows
                if row["method"] == agg["method"]
                and row["p_target"] == agg["p_target"] and not row["error"]]
        mean, std, count = _mean_std(errs)
        agg["reconstruction_error_mean"] = mean
        agg["reconstruction_error_std"] = std
    return {"schema_version": SCHEMA_VERSION, "kind": "crossval",
            "spec": {"r": r, "folds": folds, "gamma": gamma,
                     "p_values": list(p_values), "methods": list(methods)},
            "rows": rows, "aggregates": aggregates}


def _self_check(report):
    """Aggregates must be recomputable from the emitted rows."""
    if report["kind"] in ("benchmark-random", "crossval"):
        fresh = aggregate_rows(report["rows"])
        stored = report["aggregates"]
        keys = ("method", "p_target", "trials", "failures", "trace_mean",
                "normalized_trace_mean")
        for a, b in zip(fresh, stored):
            for key in keys:
                va, vb = a[key], b.get(key)
                if isinstance(va, float):
                    ok = (math.isnan(va) and math.isnan(vb)) or va == vb
                else:
                    ok = va == vb
                if not ok:
                    raise AssertionError(
                        "aggregate self-check failed for %s" % key
                    )


def write_report(report, path, fmt="csv"):
    """Write rows (and aggregates) after the aggregate self-check."""
    _self_check(report)
    if fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, default=_json_default)
        return
    if fmt != "csv":
        raise InvalidParameterError("unknown output format %r" % (fmt,))
    _write_csv(report["rows"], path)
    base, ext = os.path.splitext(path)
    if report.get("aggregates"):
        _write_csv(report["aggregates"], base + ".aggregates" + (ext or ".csv"))


def _write_csv(rows, path):
    if not rows:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write("")
        return
    fields = []
    for row in rows:
        for key in row:
            if key not in fields:
                fields.append(key)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _csv_cell(row.get(k)) for k in fields})


def _csv_cell(value):
    if isinstance(value, (list, tuple)):
        return " ".join(str(v) for v in value)
    return value


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError("not JSON serializable: %r" % type(obj))
