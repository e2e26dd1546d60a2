import json

import pytest

from manisp import cli, harness, kernelscores
from manisp.cli import main


@pytest.fixture
def spd_data(tmp_path):
    assert main(["gen-data", "--task", "spd_inverse", "--dim", "2", "--n", "30", "--seed", "1", "--out", str(tmp_path)]) == 0
    return tmp_path / "data.jsonl"


def test_gen_data_variants(tmp_path, capsys):
    for task in ("sphere_toy", "simplex_multilabel"):
        out = tmp_path / task
        assert main(["gen-data", "--task", task, "--dim", "3", "--n", "12", "--seed", "0", "--out", str(out)]) == 0
        assert len(harness.load_dataset(out / "data.jsonl")) == 12
    assert main(["gen-data", "--task", "sphere_toy", "--n", "7", "--csv", "--out", str(tmp_path / "csv")]) == 0
    data = harness.load_dataset(tmp_path / "csv" / "data.csv")
    assert len(data) == 7
    assert main(["gen-data", "--task", "spd_inverse", "--csv", "--n", "3", "--out", str(tmp_path / "x")]) == 2


def test_train_predict_eval(tmp_path, spd_data, capsys):
    out = tmp_path / "run"
    assert main(["train", "--data", str(spd_data), "--sigma", "5", "--lambda", "1e-3", "--out", str(out)]) == 0
    assert main(["predict", "--model", str(out / "model.json"), "--data", str(spd_data), "--max-iters", "50", "--out", str(out)]) == 0
    assert main(["eval", "--predictions", str(out / "predictions.jsonl"), "--data", str(spd_data), "--out", str(out)]) == 0
    summary = json.loads((out / "eval.json").read_text())
    assert summary["feasible"] and summary["n"] == 30
    assert summary["delta"]["mean"] < 1.0


def test_train_cross_validates_from_config(tmp_path, spd_data, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"sigmas": [1.0, 10.0], "lambdas": [1e-4, 1e-2], "seed": 4}))
    out = tmp_path / "cv"
    for method in ("sp", "krls"):
        assert main(["train", "--data", str(spd_data), "--config", str(cfg), "--method", method, "--out", str(out)]) == 0
        table = json.loads((out / "cv.json").read_text())
        assert len(table) == 4
        model = cli.load_model(out / "model.json")
        assert model.score_model.sigma in (1.0, 10.0)
    assert main(["predict", "--model", str(out / "model.json"), "--data", str(spd_data), "--out", str(out)]) == 0


def test_manifold_flag_must_match_data(tmp_path, spd_data):
    assert main(["train", "--data", str(spd_data), "--manifold", "sphere", "--sigma", "1", "--lambda", "1", "--out", str(tmp_path)]) == 2


def test_benchmark_command(tmp_path, capsys):
    args = ["benchmark", "--task", "sphere_toy", "--n-train", "20", "--n-val", "5", "--n-test", "5"]
    args += ["--sigmas", "0.5", "--lambdas", "1e-3", "--seed", "2", "--out", str(tmp_path)]
    assert main(args) == 0
    text = capsys.readouterr().out
    assert text == (tmp_path / "report.csv").read_text()
    assert text.startswith("method,metric,mean,stddev,n_test,seed\n")


def test_gradcheck_command(tmp_path, capsys):
    assert main(["gradcheck", "--manifold", "spd", "--dim", "3", "--trials", "5", "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.startswith("PASS")


def test_gradcheck_failure_exit_code(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(harness, "run_gradcheck", lambda M, trials, rng: {"manifold": repr(M), "passed": False, "max_rel_err": 1.0, "trials": trials, "excluded": 0})
    assert main(["gradcheck", "--manifold", "sphere", "--trials", "1", "--out", str(tmp_path)]) == 3


def test_numerical_failure_exit_code(tmp_path, spd_data, monkeypatch):
    def boom(*a, **k):
        raise kernelscores.LinAlgError("forced")

    monkeypatch.setattr(kernelscores, "cho_factor", boom)
    assert main(["train", "--data", str(spd_data), "--sigma", "1", "--lambda", "1", "--out", str(tmp_path)]) == 3


def test_config_error_exit_codes(tmp_path):
    assert main(["train", "--data", str(tmp_path / "missing.jsonl"), "--sigma", "1", "--lambda", "1"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    assert main(["gradcheck", "--config", str(bad)]) == 2
    bad.write_text("{not json")
    assert main(["gradcheck", "--config", str(bad)]) == 2
    model = tmp_path / "m.json"
    model.write_text(json.dumps({"version": "1", "kind": "svm"}))
    assert main(["predict", "--model", str(model), "--data", str(tmp_path / "x.jsonl")]) == 2


def test_unknown_subcommand():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
