import json
from pathlib import Path

import pytest
from typer.testing import CliRunner

from multiplicity.artifacts import read_prediction_file, write_score_file
from multiplicity.cli.common import ExitCode
from multiplicity.cli.main import app
from multiplicity.grid import expand_grid
from multiplicity.models import ScoreRecord
from multiplicity.services.pipeline.schemas import load_pipeline_config
from multiplicity.sheets.fixtures import list_fixtures

runner = CliRunner()


def invoke(*args: str):
    return runner.invoke(app, [str(arg) for arg in args])


@pytest.fixture
def out(tmp_path) -> Path:
    return tmp_path / "out"


def test_fixture_sheet_as_csv(out):
    result = invoke("--out", out, "sheet", "--fixture", "utkface-accuracy", "--format", "csv")
    assert result.exit_code == ExitCode.OK, result.output
    lines = (out / "sheets" / "utkface-accuracy.csv").read_text().splitlines()
    assert lines[-1] == "delta_max_all,1.12"


def test_fixture_sheet_in_three_formats(out):
    result = invoke(
        "--out", out, "sheet", "--fixture", "cifar10s-fairness", "--format", "text,csv,html"
    )
    assert result.exit_code == ExitCode.OK, result.output
    names = sorted(path.name for path in (out / "sheets").iterdir())
    assert names == ["cifar10s-fairness.csv", "cifar10s-fairness.html", "cifar10s-fairness.txt"]
    assert "Delta max (all): 11.16" in (out / "sheets" / "cifar10s-fairness.txt").read_text()


def test_unknown_fixture_and_format(out):
    result = invoke("--out", out, "sheet", "--fixture", "mnist-accuracy")
    assert result.exit_code == ExitCode.VALIDATION
    assert "utkface-accuracy" in result.output
    result = invoke("--out", out, "sheet", "--fixture", "utkface-accuracy", "--format", "pdf")
    assert result.exit_code == ExitCode.VALIDATION


def test_fixtures_list():
    result = invoke("fixtures", "list")
    assert result.exit_code == ExitCode.OK
    assert all(name in result.output for name in list_fixtures())


def test_missing_config_is_a_validation_error(tmp_path):
    result = invoke("--config", tmp_path / "absent.toml", "train-grid")
    assert result.exit_code == ExitCode.VALIDATION
    assert invoke("train-grid").exit_code == ExitCode.VALIDATION


def test_invalid_config_fails_before_training(small_config_path, out):
    text = small_config_path.read_text().replace("epochs = 3", "epochs = 0")
    small_config_path.write_text(text)
    result = invoke("--config", small_config_path, "--out", out, "train-grid")
    assert result.exit_code == ExitCode.VALIDATION
    assert not out.exists()


def test_eval_before_training_is_a_runtime_error(small_config_path, out):
    result = invoke("--config", small_config_path, "--out", out, "eval")
    assert result.exit_code == ExitCode.RUNTIME
    assert "has not been trained" in result.output


def test_full_pipeline_is_deterministic(small_config_path, tmp_path):
    snapshots = []
    for name in ("first", "second"):
        out = tmp_path / name
        base = ["--config", small_config_path, "--out", out, "--jobs", "2"]
        for command in (["train-grid"], ["eval"], ["sheet", "--format", "text,csv,html"], ["report"]):
            result = invoke(*base, *command)
            assert result.exit_code == ExitCode.OK, result.output
        result = invoke(*base, "select", "--k", "100")
        assert result.exit_code == ExitCode.OK, result.output
        snapshots.append(
            {
                str(path.relative_to(out)): path.read_bytes()
                for path in sorted(out.rglob("*"))
                if path.is_file()
            }
        )
    assert snapshots[0] == snapshots[1]
    assert "reports/selection-k100.txt" in snapshots[0]
    assert "sheets/pgd.html" in snapshots[0]


def test_sheet_rejects_unknown_metric(small_config_path, out):
    config = load_pipeline_config(small_config_path)
    write_score_file(
        [ScoreRecord(run=run, metric_id="accuracy", score=90.0) for run in expand_grid(config.grid)],
        out / "scores.jsonl",
    )
    result = invoke("--config", small_config_path, "--out", out, "sheet", "--metric", "fairness")
    assert result.exit_code == ExitCode.VALIDATION
    assert "available" in result.output
    result = invoke("--config", small_config_path, "--out", out, "sheet", "--metric", "accuracy")
    assert result.exit_code == ExitCode.OK, result.output


def test_empty_selection_has_its_own_exit_code(small_config_path, out):
    config = load_pipeline_config(small_config_path)
    runs = expand_grid(config.grid)
    scores = []
    for rank, run in enumerate(runs):
        scores += [
            ScoreRecord(run=run, metric_id="accuracy", score=90.0 - rank),
            ScoreRecord(run=run, metric_id="ood-a", score=50.0 + rank),
            ScoreRecord(run=run, metric_id="minority", score=70.0 + rank),
            ScoreRecord(run=run, metric_id="pgd", score=40.0),
        ]
    path = write_score_file(scores, out / "custom-scores.jsonl")

    result = invoke("--config", small_config_path, "--out", out, "select", "--scores", path, "--k", "25")
    assert result.exit_code == ExitCode.EMPTY_SELECTION
    assert "count=0" in (out / "reports" / "selection-k25.txt").read_text()

    result = invoke("--config", small_config_path, "--out", out, "select", "--scores", path, "--k", "100")
    assert result.exit_code == ExitCode.OK


def test_seed_override(small_config_path, out):
    result = invoke(
        "--config", small_config_path, "--out", out, "--seed-override", "5", "train-grid"
    )
    assert result.exit_code == ExitCode.OK, result.output
    assert len(list((out / "runs").iterdir())) == 2


def test_train_grid_exports_datasets_and_attacks(small_config_path, out):
    result = invoke(
        "--config", small_config_path, "--out", out, "--seed-override", "5",
        "train-grid", "--export-datasets", "--export-attacks",
    )
    assert result.exit_code == ExitCode.OK, result.output

    assert sorted(path.name for path in (out / "data").iterdir()) == [
        "in-dist.jsonl", "ood-a.jsonl", "train.jsonl"
    ]
    first = json.loads((out / "data" / "train.jsonl").read_text().splitlines()[0])
    assert set(first) == {"sample_id", "input", "label", "groups"}

    for run_dir in (out / "runs").iterdir():
        attacked = read_prediction_file(run_dir / "preds-attack-pgd.jsonl")
        plain = read_prediction_file(run_dir / "preds-in-dist.jsonl")
        assert [r.sample_id for r in attacked.records] == [r.sample_id for r in plain.records]

    manifests = {p: p.read_bytes() for p in (out / "runs").glob("*/manifest.json")}
    rerun = invoke("--config", small_config_path, "--out", out, "--seed-override", "5", "train-grid")
    assert rerun.exit_code == ExitCode.OK
    assert {p: p.read_bytes() for p in manifests} == manifests
