import json
import subprocess
import sys

import numpy as np
import pytest

from corrlogdet.cli import EXIT_ERROR, EXIT_OK, EXIT_STAT_FAIL, main


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


def run_json(capsys, *argv):
    code, out = run(capsys, *argv)
    return code, json.loads(out.out)


def test_simulate(capsys, tmp_path):
    out = tmp_path / "s.json"
    code, doc = run_json(capsys, "simulate", "--p", "20", "--n", "60", "--reps", "30", "--alpha", "3.5",
                         "--seed", "3", "--out", str(out))
    assert code == EXIT_OK
    assert {"config", "consts", "ks", "moments", "z_quantiles"} <= set(doc)
    assert out.exists() and (tmp_path / "s.qq.csv").exists()
    assert doc["config"]["law"]["alpha"] == 3.5


def test_simulate_workers_identical(capsys, tmp_path):
    paths = []
    for w in ("1", "2"):
        path = tmp_path / f"w{w}.json"
        code, _ = run(capsys, "simulate", "--p", "15", "--n", "40", "--reps", "12", "--alpha", "3",
                      "--workers", w, "--out", str(path))
        assert code == EXIT_OK
        paths.append(path)
    z = [json.loads(p.read_text())["z"] for p in paths]
    assert z[0] == z[1]


def test_simulate_ks_fail(capsys):
    code, _ = run(capsys, "simulate", "--p", "20", "--n", "60", "--reps", "20", "--ks-max", "0.0")
    assert code == EXIT_STAT_FAIL


def test_simulate_overlap_reports_both(capsys):
    code, doc = run_json(capsys, "simulate", "--p", "95", "--n", "100", "--reps", "3")
    assert code == EXIT_OK
    assert doc["consts"]["regime"] == "near_singular"
    assert doc["overlap_alternative"]["consts"]["regime"] == "general"


def test_usage_error_exit_1(capsys):
    code = None
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--p", "3"])
    assert exc.value.code == EXIT_ERROR
    code, _ = run(capsys, "simulate", "--p", "30", "--n", "10")
    assert code == EXIT_ERROR


def test_oracle_compare(capsys):
    code, doc = run_json(capsys, "oracle-compare", "--p", "10", "--n", "30", "--reps", "400", "--ks-max", "0.1")
    assert code == EXIT_OK and doc["ks"] <= 0.1
    code, _ = run(capsys, "oracle-compare", "--p", "10", "--n", "30", "--reps", "200", "--ks-max", "0")
    assert code == EXIT_STAT_FAIL


def test_replace_exp(capsys):
    code, doc = run_json(capsys, "replace-exp", "--p", "100", "--n", "200", "--alpha", "3.5", "--reps", "4")
    assert code == EXIT_OK and doc["s1"] == 1 and doc["reps"] == 4


def test_test_command(capsys, tmp_path):
    X = np.random.default_rng(0).standard_normal((30, 90))
    path = tmp_path / "d.csv"
    np.savetxt(path, X.T, delimiter=",", header=",".join(f"v{i}" for i in range(30)), comments="")
    code, doc = run_json(capsys, "test", "--input", str(path), "--header", "--transpose")
    assert code == EXIT_OK
    assert doc["p"] == 30 and doc["n"] == 90
    assert {"z", "pvalue", "reject", "consts"} <= set(doc)


def test_test_missing_file(capsys, tmp_path):
    code, out = run(capsys, "test", "--input", str(tmp_path / "missing.csv"))
    assert code == EXIT_ERROR and "missing.csv" in out.err


def test_verify_bounds(capsys):
    code, doc = run_json(capsys, "verify-bounds", "--n", "30", "--i", "7", "--instances", "3")
    assert code == EXIT_OK and doc["passed"] == 3 and doc["failed"] == 0
    code, _ = run(capsys, "verify-bounds", "--n", "30", "--i", "30")
    assert code == EXIT_ERROR


def test_resolvent_check(capsys):
    code, doc = run_json(capsys, "resolvent-check", "--p", "100", "--n", "200", "--reps", "3",
                         "--eps-grid", "0.3,0.5")
    assert code == EXIT_OK
    assert [c["epsilon"] for c in doc["checks"]] == [0.3, 0.5]


def test_moments_check(capsys):
    code, doc = run_json(capsys, "moments-check", "--n", "50", "--reps", "20000", "--gaussian",
                         "--index", "4")
    assert code == EXIT_OK
    assert doc["theoretical_limit"] == pytest.approx(3 / (50 * 52))
    assert set(doc) == {"estimate", "se", "scaled", "scaled_se", "theoretical_limit", "ratio", "samples",
                        "chunk_rows"}


def test_truncate_stats(capsys):
    code, doc = run_json(capsys, "truncate-stats", "--p", "50", "--n", "100", "--alpha", "3.5", "--reps", "3")
    assert code == EXIT_OK
    assert set(doc) == {"plan", "reps", "changed_fraction_distribution", "bn_flag_rate"}
    code, _ = run(capsys, "truncate-stats", "--p", "50", "--n", "100")
    assert code == EXIT_ERROR


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "corrlogdet.cli", "verify-bounds", "--n", "12", "--i", "3",
                           "--instances", "1"], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["all_ok"]
