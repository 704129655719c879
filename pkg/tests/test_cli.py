import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from dslearn.cli import main
from dslearn.data import read_matrix


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("gen")
    assert run("generate", "--nodes", 30, "--gt-size", 6, "--samples", 40, "--sigma", 0,
               "--seed", 1, "--out", out) == 0
    return out


@pytest.fixture(scope="module")
def model_dir(dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("fit")
    assert run("fit", "--data", dataset, "--preset", "synthetic", "--out", out) == 0
    return out


def test_generate_files(tmp_path):
    assert run("generate", "--nodes", 100, "--tau", 0.2, "--samples", 300, "--gt-size", 15,
               "--sigma", 40, "--seed", 7, "--out", tmp_path) == 0
    for name in ("data.csv", "labels.csv", "edges.csv", "gt_nodes.csv", "config.json"):
        assert (tmp_path / name).exists()
    X, header = read_matrix(tmp_path / "data.csv")
    assert X.shape == (100, 300) and len(header) == 100
    assert len((tmp_path / "gt_nodes.csv").read_text().split()) == 15
    cfg = json.loads((tmp_path / "config.json").read_text())
    assert cfg["sigma_std"] == 40


def test_sigma2_is_variance(tmp_path):
    assert run("generate", "--nodes", 20, "--gt-size", 3, "--samples", 6, "--sigma2", 40,
               "--out", tmp_path) == 0
    cfg = json.loads((tmp_path / "config.json").read_text())
    assert cfg["sigma_std"] == pytest.approx(40 ** 0.5)


def test_missing_nodes(capsys):
    with pytest.raises(SystemExit) as exc:
        run("generate", "--tau", 0.2)
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_same_seed_byte_identical(tmp_path):
    for sub in ("a", "b"):
        assert run("generate", "--nodes", 30, "--gt-size", 5, "--samples", 20, "--seed", 3,
                   "--out", tmp_path / sub) == 0
    for name in ("data.csv", "labels.csv", "edges.csv", "gt_nodes.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_fit_preset(model_dir):
    cfg = json.loads((model_dir / "config.json").read_text())
    hp = cfg["hyperparams"]
    assert (hp["lambda1"], hp["lambda2"], hp["pi"]) == (0.1, 0.3, 1.0)
    model = json.loads((model_dir / "model.json").read_text())
    assert len(model["node_names"]) == 30


def test_fit_idempotent(dataset, model_dir, tmp_path):
    assert run("fit", "--data", dataset, "--preset", "synthetic", "--out", tmp_path) == 0
    assert (tmp_path / "model.json").read_bytes() == (model_dir / "model.json").read_bytes()


def test_fit_dumps(dataset, tmp_path):
    assert run("fit", "--data", dataset, "--trace-csv", "trace.csv", "--dump-dual",
               tmp_path / "dual", "--out", tmp_path) == 0
    rows = list(csv.DictReader(open(tmp_path / "trace.csv")))
    assert rows and set(rows[0]) == {"outer_iter", "objective", "gap", "inner_iters"}
    K = np.loadtxt(tmp_path / "dual" / "K.csv", delimiter=",")
    assert K.shape == (40, 40)


def test_select(model_dir, tmp_path):
    assert run("select", "--model", model_dir / "model.json", "--k", 15, "--out", tmp_path) == 0
    rows = list(csv.DictReader(open(tmp_path / "selection.csv")))
    assert len(rows) == 15
    assert [int(r["rank"]) for r in rows] == list(range(1, 16))
    scores = [float(r["score"]) for r in rows]
    assert scores == sorted(scores, reverse=True)


def test_predict_training_data(dataset, model_dir, tmp_path, capsys):
    assert run("predict", "--model", model_dir / "model.json", "--data", dataset,
               "--out", tmp_path) == 0
    assert "agreement 1.0000" in capsys.readouterr().out
    assert json.loads((tmp_path / "config.json").read_text())["agreement"] == 1.0


def test_unreadable_model(dataset, tmp_path):
    bad = tmp_path / "model.json"
    bad.write_text("{not json")
    assert run("predict", "--model", bad, "--data", dataset, "--out", tmp_path) == 3
    assert run("select", "--model", tmp_path / "missing.json", "--out", tmp_path) == 3


def test_label_mismatch(dataset, model_dir, tmp_path):
    labels = tmp_path / "labels.csv"
    labels.write_text("1\n-1\n")
    assert run("predict", "--model", model_dir / "model.json", "--matrix",
               dataset / "data.csv", "--labels", labels, "--out", tmp_path) == 2
    assert run("fit", "--matrix", dataset / "data.csv", "--labels", labels, "--edges",
               dataset / "edges.csv", "--out", tmp_path) == 2


def test_evaluate(dataset, tmp_path):
    assert run("evaluate", "--data", dataset, "--k", 6, "--roc-csv", "roc.csv",
               "--out", tmp_path) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["accuracy"] == 1.0
    assert len(report["selected"]) == 6
    assert 0.0 <= report["auc"] <= 1.0
    assert (tmp_path / "roc.csv").read_text().startswith("fpr,tpr")


def test_config_file_overridden_by_flags(dataset, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"lambda1": 0.5, "lambda2": 0.05}))
    assert run("fit", "--data", dataset, "--config", cfg, "--lambda2", 0.2, "--out", tmp_path) == 0
    hp = json.loads((tmp_path / "config.json").read_text())["hyperparams"]
    assert (hp["lambda1"], hp["lambda2"]) == (0.5, 0.2)


def test_sweep(dataset, tmp_path, capsys):
    assert run("sweep", "--data", dataset, "--lambda1-grid", "0.1,0.5", "--lambda2-grid", "0.3",
               "--k", 6, "--folds", 3, "--out", tmp_path) == 0
    rows = list(csv.DictReader(open(tmp_path / "sweep.csv")))
    assert len(rows) == 2
    assert "best lambda1=" in capsys.readouterr().out


def test_help_lists_defaults():
    out = subprocess.run([sys.executable, "-m", "dslearn.cli", "fit", "--help"],
                         capture_output=True, text=True, check=True).stdout
    for flag in ("--lambda1", "--lambda2", "--pi", "--preset", "--out", "--config"):
        assert flag in out
    assert "default: 0.1" in out
