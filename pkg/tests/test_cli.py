import csv
import json
from pathlib import Path

import pytest

from robexp import main
from services.criteria import auc

FAST_TRAIN = {"train": {"learning_rate": 0.5, "epochs": 50, "batch_size": 16}}


def run(capsys, *args):
    """Exit code and the parsed status line of one CLI call."""
    code = main([str(a) for a in args])
    out = capsys.readouterr().out.strip().splitlines()
    status = json.loads(out[-1]) if code == 0 and out else None
    return code, status


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


@pytest.fixture
def blobs(tmp_path, capsys):
    """Blobs dataset and a model trained on it."""
    config = tmp_path / "run.json"
    config.write_text(json.dumps(FAST_TRAIN))
    data = tmp_path / "blobs.csv"
    model = tmp_path / "model.json"
    code, status = run(capsys, "--seed", 7, "gen-data", "--kind", "blobs", "--n", 200, "--output", data)
    assert code == 0 and status["n"] == 200
    code, status = run(capsys, "--config", config, "--seed", 7, "train", "--dataset", data, "--model", model)
    assert code == 0
    return {"config": config, "data": data, "model": model, "train_status": status}


def test_train_separates_blobs(blobs):
    status = blobs["train_status"]
    assert status["train_accuracy"] >= 0.99
    assert status["test_accuracy"] >= 0.99


def test_gen_data_is_seeded(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, "--seed", 3, "gen-data", "--kind", "blobs", "--n", 50, "--output", a)[0] == 0
    assert run(capsys, "--seed", 3, "gen-data", "--kind", "blobs", "--n", 50, "--output", b)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def _evaluate(capsys, blobs, out, jobs=1):
    return run(
        capsys,
        "--config", blobs["config"], "--seed", 7, "--jobs", jobs, "--out", out,
        "evaluate", "--dataset", blobs["data"], "--model", blobs["model"],
        "--methods", "random,grad", "--criteria", "robustness_sbar,deletion", "--num-examples", 5,
    )


def test_evaluate_writes_curves_and_report(blobs, tmp_path, capsys):
    code, status = _evaluate(capsys, blobs, tmp_path / "runs")
    assert code == 0
    run_dir = Path(status["run_dir"])
    rows = read_rows(run_dir / "curves.csv")
    random_sbar = [r for r in rows if r["method"] == "random" and r["criterion"] == "robustness_sbar"]
    assert len(random_sbar) == 9
    assert all(int(r["n_examples"]) == 5 for r in random_sbar)

    report = json.loads((run_dir / "report.json").read_text())
    points = [(float(r["fraction"]), float(r["mean_value"])) for r in random_sbar]
    assert report["methods"]["random"]["robustness_sbar_auc"] == auc(points)
    assert set(report["methods"]["grad"]) == {"robustness_sbar_auc", "deletion_auc"}
    assert "output_dir" not in report["config"]

    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["command"] == "evaluate"
    assert manifest["diagnostics"]["examples_evaluated"] == 5
    assert len(read_rows(run_dir / "per_example.csv")) == 2 * 2 * 5 * 9


def test_evaluate_is_independent_of_jobs(blobs, tmp_path, capsys):
    _, first = _evaluate(capsys, blobs, tmp_path / "one", jobs=1)
    _, second = _evaluate(capsys, blobs, tmp_path / "two", jobs=2)
    name = Path(first["run_dir"]).name
    assert name == Path(second["run_dir"]).name
    for filename in ("curves.csv", "per_example.csv", "report.json"):
        assert (tmp_path / "one" / name / filename).read_bytes() == (tmp_path / "two" / name / filename).read_bytes()


def test_explain_writes_scores_and_ranks(blobs, tmp_path, capsys):
    code, status = run(
        capsys, "--out", tmp_path / "runs",
        "explain", "--dataset", blobs["data"], "--model", blobs["model"], "--index", 0, "--method", "grad",
    )
    assert code == 0
    rows = read_rows(status["path"])
    assert [int(r["feature_index"]) for r in rows] == [0, 1]
    assert sorted(int(r["rank"]) for r in rows) == [0, 1]
    assert all(int(r["example_id"]) == 0 for r in rows)
    assert status["top_features"] == [int(r["feature_index"]) for r in rows if r["rank"] == "0"]


def test_explain_set_method_and_target(blobs, tmp_path, capsys):
    base = ("--out", tmp_path / "runs", "explain", "--dataset", blobs["data"], "--model", blobs["model"], "--index", 1)
    code, status = run(capsys, *base, "--method", "greedy-as", "--samples", 50)
    assert code == 0 and status["method"] == "greedy-as"
    other = 1 - status["predicted"]
    code, targeted = run(capsys, *base, "--method", "greedy", "--target", other)
    assert code == 0 and targeted["path"].endswith(f"-t{other}.csv")
    code, _ = run(capsys, *base, "--method", "greedy", "--target", status["predicted"])
    assert code == 2


def test_diagnostics_commands(blobs, tmp_path, capsys):
    # the diagnostics read the dataset and model from the config file
    config = json.loads(blobs["config"].read_text())
    config.update(dataset_path=str(blobs["data"]), model_path=str(blobs["model"]), num_examples=4)
    blobs["config"].write_text(json.dumps(config))
    common = ("--config", blobs["config"], "--out", tmp_path / "runs")
    inputs = ("--methods", "random,grad")

    code, status = run(capsys, *common, "sanity", *inputs)
    assert code == 0
    assert status["mean_rho"]["random"] == 1.0

    code, status = run(capsys, *common, "sensitivity", *inputs, "--radius", 0.0, "--sens-samples", 3)
    assert code == 0
    assert status["mean_sensitivity"] == {"random": 0.0, "grad": 0.0}

    code, status = run(capsys, *common, "reference-sweep", *inputs, "--values", 0.0, "--values", 1.0)
    assert code == 0
    assert status["references"] == ["0.0", "1.0"]


def test_error_exit_codes(blobs, tmp_path, capsys):
    explain = ("explain", "--dataset", blobs["data"], "--model", blobs["model"])
    assert run(capsys, "--out", tmp_path, *explain, "--index", 0, "--method", "bogus")[0] == 2
    assert run(capsys, "--out", tmp_path, *explain, "--index", 10_000)[0] == 2
    assert run(capsys, "--out", tmp_path, "evaluate", "--dataset", blobs["data"], "--model", blobs["model"],
               "--methods", "bogus")[0] == 2
    assert run(capsys, "--out", tmp_path, "evaluate", "--dataset", tmp_path / "missing.csv",
               "--model", blobs["model"])[0] == 3
    assert run(capsys, "train", "--dataset", blobs["data"])[0] == 2

    broken = tmp_path / "broken.json"
    broken.write_text('{"seed": 1,\n "methods": [}')
    assert run(capsys, "--config", broken, "gen-data", "--kind", "blobs", "--n", 20, "--output", tmp_path / "x.csv")[0] == 2
    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"colour": "blue"}))
    assert run(capsys, "--config", unknown, "gen-data", "--kind", "blobs", "--n", 20, "--output", tmp_path / "x.csv")[0] == 2


def test_train_on_too_few_rows_is_a_data_error(tmp_path, capsys):
    data = tmp_path / "digits.csv"
    model = tmp_path / "model.json"
    assert run(capsys, "gen-data", "--kind", "digits8x8", "--n", 10, "--output", data)[0] == 0
    assert run(capsys, "train", "--dataset", data, "--model", model)[0] == 3
    assert not model.exists()


def test_negative_labels_are_a_data_error(tmp_path, capsys):
    data = tmp_path / "bad.csv"
    data.write_text("".join(f"{-1 if i % 2 else 0},{i / 20}\n" for i in range(20)))
    assert run(capsys, "train", "--dataset", data, "--model", tmp_path / "model.json")[0] == 3
