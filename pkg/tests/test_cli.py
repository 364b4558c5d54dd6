import json
import subprocess
import sys

import numpy as np
import pytest

from bbal.io import write_prediction_csv
from bbal.kernels import PredictionMatrix

CLI = [sys.executable, "-m", "bbal"]


def run_cli(*args, **kwargs):
    return subprocess.run(CLI + list(args), capture_output=True, text=True, **kwargs)


@pytest.fixture
def toy_predictions(tmp_path):
    # id 2 has the largest row spread.
    pred = PredictionMatrix(
        np.array([0, 1, 2, 3]),
        np.array([[1.0, 1.1], [0.0, 0.5], [3.0, -3.0], [2.0, 2.0]]),
    )
    path = tmp_path / "pred.csv"
    write_prediction_csv(pred, str(path))
    return str(path)


def test_version_and_help():
    out = run_cli("--version")
    assert out.returncode == 0 and out.stdout.startswith("bbal ")
    for sub in ("gen-data", "select", "run", "verify", "report"):
        assert run_cli(sub, "--help").returncode == 0


def test_unknown_flag_rejected():
    assert run_cli("verify", "--bogus").returncode == 2


def test_select_bald_picks_max_spread(toy_predictions, tmp_path):
    out_path = str(tmp_path / "sel.json")
    out = run_cli("select", "--predictions", toy_predictions, "--method", "bald",
                  "--batch-size", "1", "--out", out_path)
    assert out.returncode == 0
    assert out.stdout.split() == ["2"]
    obj = json.loads(open(out_path).read())
    assert obj["method"] == "bald" and obj["selected"] == [2]


def test_select_is_reproducible(toy_predictions, tmp_path):
    a, b = str(tmp_path / "a.json"), str(tmp_path / "b.json")
    for path in (a, b):
        out = run_cli("select", "--predictions", toy_predictions, "--method",
                      "badge", "--batch-size", "2", "--seed", "4", "--out", path)
        assert out.returncode == 0
    assert open(a).read() == open(b).read()


def test_select_maxdet_duplicate_instance(tmp_path):
    # Two identical points plus a lower-variance but nearly orthogonal one:
    # maxdet takes one duplicate, then skips the other for the distinct point.
    pred = PredictionMatrix(
        np.array([0, 1, 2]),
        np.array([[1.0, -1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 0.9, -0.9]]),
    )
    path = str(tmp_path / "dup.csv")
    write_prediction_csv(pred, path)
    out = run_cli("select", "--predictions", path, "--method", "maxdet",
                  "--batch-size", "2", "--sigma", "0.3")
    assert out.returncode == 0
    assert out.stdout.split() == ["0", "2"]


def test_select_exit_codes(tmp_path, toy_predictions):
    bad = tmp_path / "bad.csv"
    bad.write_text("id,m0,m1\n0,1.0,2.0\n1,nope,0.0\n")
    out = run_cli("select", "--predictions", str(bad), "--method", "bald",
                  "--batch-size", "1")
    assert out.returncode == 2
    assert ":3:" in out.stderr  # line-numbered diagnostic

    out = run_cli("select", "--predictions", toy_predictions, "--method", "bald",
                  "--batch-size", "99")
    assert out.returncode == 3


def test_gen_data_deterministic(tmp_path):
    a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    for p in (a, b):
        assert run_cli("gen-data", "--n", "30", "--seed", "6", "--out", p).returncode == 0
    assert open(a).read() == open(b).read()


def test_verify_exit_codes():
    assert run_cli("verify").returncode == 0
    assert run_cli("verify", "--sigma", "0").returncode != 0


def test_run_smoke_and_report(tmp_path):
    config = {
        "dataset": {"generator": "friedman1", "n": 120, "noise_sd": 1.0, "seed": 1},
        "initial_train_size": 8,
        "batch_size": 8,
        "rounds": 2,
        "trials": 2,
        "methods": ["uniform", "lcmd"],
        "ensemble": {"kind": "random_feature_ridge", "member_count": 4,
                     "n_random_features": 16},
        "seed": 9,
        "output": str(tmp_path / "results.csv"),
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config))
    out = run_cli("run", "--config", str(cfg_path))
    assert out.returncode == 0, out.stderr
    lines = open(config["output"]).read().strip().splitlines()
    assert len(lines) == 1 + 2 * 2 * 3 * 5  # methods * trials * rounds+1 * metrics

    rep = run_cli("report", "--results", config["output"],
                  "--svg", str(tmp_path / "curves.svg"))
    assert rep.returncode == 0
    assert "mean log-RMSE" in rep.stdout
    assert (tmp_path / "curves.svg").read_text().startswith("<svg")


def test_run_determinism_across_jobs(tmp_path):
    config = {
        "dataset": {"generator": "friedman1", "n": 100, "noise_sd": 1.0, "seed": 2},
        "initial_train_size": 6,
        "batch_size": 6,
        "rounds": 1,
        "trials": 2,
        "methods": ["uniform", "maxdet"],
        "ensemble": {"kind": "random_feature_ridge", "member_count": 4,
                     "n_random_features": 16},
        "seed": 1,
        "output": str(tmp_path / "r.csv"),
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config))
    outputs = []
    for jobs in ("1", "4"):
        assert run_cli("run", "--config", str(cfg_path), "--jobs", jobs).returncode == 0
        outputs.append(open(config["output"], "rb").read())
    assert outputs[0] == outputs[1]


def test_report_empty_results(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("method,trial,round,n_train,metric,value,seconds\n")
    out = run_cli("report", "--results", str(path))
    assert out.returncode == 0
    assert "no records" in out.stdout


def test_run_rejects_bad_config(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text("{not json")
    assert run_cli("run", "--config", str(cfg_path)).returncode == 2
