import json

import numpy as np
import pytest

from sensorselect import save_snapshots
from sensorselect.cli import main


def run(argv):
    return main(argv)


def test_select_greedy_random_problem(tmp_path, capsys):
    out = tmp_path / "sel.json"
    code = run(["select", "--method", "greedy", "--n", "60", "--r", "4",
                "--p", "8", "--seed", "3", "--output", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    assert report["schema_version"] == 1
    rec = report["record"]
    assert rec["p_selected"] == 8
    assert len(set(rec["selection"])) == 8
    lines = (tmp_path / "sel.json.selection.csv").read_text().splitlines()
    assert lines[0] == "sensor_index"
    assert sorted(int(v) for v in lines[1:]) == sorted(rec["selection"])


def test_select_deterministic_across_runs(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["select", "--method", "admm-l0bht", "--n", "80", "--r", "3",
            "--p", "6", "--seed", "11"]
    assert run(args + ["--output", str(a)]) == 0
    assert run(args + ["--output", str(b)]) == 0
    ra = json.loads(a.read_text())["record"]
    rb = json.loads(b.read_text())["record"]
    assert ra["selection"] == rb["selection"]
    assert ra["trace"] == rb["trace"]


def test_select_needs_p_or_lambda(tmp_path):
    code = run(["select", "--method", "greedy", "--n", "20", "--r", "2",
                "--output", str(tmp_path / "x.json")])
    assert code == 2


def test_select_empty_result_exit_code(tmp_path):
    # a huge sparsity weight wipes out every candidate row
    code = run(["select", "--method", "admm-bst", "--n", "30", "--r", "2",
                "--lambda", "1e6", "--output", str(tmp_path / "x.json")])
    assert code == 1


def test_select_rejects_unknown_method(tmp_path):
    with pytest.raises(SystemExit):
        run(["select", "--method", "nope", "--n", "10", "--r", "2",
             "--p", "3", "--output", str(tmp_path / "x.json")])


def test_select_from_snapshot_file(tmp_path):
    rng = np.random.default_rng(0)
    snaps = tmp_path / "snaps.csv"
    save_snapshots(str(snaps), rng.standard_normal((40, 25)))
    out = tmp_path / "sel.json"
    code = run(["select", "--method", "greedy", "--input", str(snaps),
                "--r", "3", "--p", "5", "--output", str(out)])
    assert code == 0
    rec = json.loads(out.read_text())["record"]
    assert rec["p_selected"] == 5
    assert all(0 <= i < 40 for i in rec["selection"])


def _rows_without_timing(path):
    import csv

    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        row.pop("wall_time", None)
        row.pop("time_mean", None)
    return rows


def test_benchmark_random_repeatable_modulo_timing(tmp_path):
    args = ["benchmark-random", "--n", "50", "--r", "3", "--seed", "5",
            "--trials", "2", "--method", "greedy", "--method", "admm-l0bht",
            "--p", "5", "--p", "8"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(args + ["--output", str(a)]) == 0
    assert run(args + ["--output", str(b)]) == 0
    assert _rows_without_timing(a) == _rows_without_timing(b)
    assert _rows_without_timing(tmp_path / "a.aggregates.csv") == \
        _rows_without_timing(tmp_path / "b.aggregates.csv")


def test_benchmark_random_json_structure(tmp_path):
    out = tmp_path / "bench.json"
    code = run(["benchmark-random", "--n", "40", "--r", "2", "--seed", "1",
                "--trials", "2", "--method", "greedy", "--p", "4",
                "--format", "json", "--output", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    assert report["kind"] == "benchmark-random"
    assert len(report["rows"]) == 2  # trials x methods x p values
    agg = report["aggregates"][0]
    assert agg["normalized_trace_mean"] == pytest.approx(1.0)  # vs itself


def test_lambda_sweep_zero_weight_keeps_everything(tmp_path):
    out = tmp_path / "sweep.json"
    code = run(["lambda-sweep", "--n", "40", "--r", "3", "--seed", "2",
                "--method", "admm-bht", "--lambda", "0", "--lambda", "1e5",
                "--format", "json", "--output", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    by_lam = {row["lam"]: row for row in report["rows"]}
    assert by_lam[0.0]["p_selected"] == 40  # unpenalized: every row survives
    assert by_lam[1e5]["p_selected"] == 0
    aggs = {a["lam"]: a for a in report["aggregates"]}
    assert aggs[1e5]["empty_fraction"] == 1.0


def test_crossval_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    # low-rank signal plus noise so the POD basis is meaningful
    snaps = rng.standard_normal((50, 3)) @ rng.standard_normal((3, 30))
    snaps += 0.01 * rng.standard_normal(snaps.shape)
    path = tmp_path / "snaps.csv"
    save_snapshots(str(path), snaps)
    out = tmp_path / "cv.json"
    code = run(["crossval", "--input", str(path), "--r", "3", "--folds", "3",
                "--method", "greedy", "--p", "6", "--format", "json",
                "--output", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    assert len(report["rows"]) == 3  # one per fold
    agg = report["aggregates"][0]
    assert 0 <= agg["reconstruction_error_mean"] < 1.0


def test_crossval_rejects_single_fold(tmp_path):
    path = tmp_path / "snaps.csv"
    save_snapshots(str(path), np.random.default_rng(5).standard_normal((10, 8)))
    code = run(["crossval", "--input", str(path), "--r", "2", "--folds", "1",
                "--method", "greedy", "--p", "3",
                "--output", str(tmp_path / "cv.csv")])
    assert code == 2


def test_pod_verb_writes_orthonormal_modes(tmp_path):
    rng = np.random.default_rng(6)
    path = tmp_path / "snaps.csv"
    save_snapshots(str(path), rng.standard_normal((30, 12)))
    out = tmp_path / "modes.csv"
    code = run(["pod", "--input", str(path), "--r", "4", "--output", str(out)])
    assert code == 0
    modes = np.loadtxt(str(out), delimiter=",")
    assert modes.shape == (30, 4)
    np.testing.assert_allclose(modes.T @ modes, np.eye(4), atol=1e-10)
    sv = np.loadtxt(str(out) + ".singular_values.csv", delimiter=",")
    assert np.all(np.diff(sv) <= 0)


def test_missing_input_file_exit_code(tmp_path):
    code = run(["pod", "--input", str(tmp_path / "none.csv"), "--r", "2",
                "--output", str(tmp_path / "out.csv")])
    assert code == 2
