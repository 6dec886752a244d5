import json

import pytest

from multiplicity.artifacts import (
    PredictionFileError,
    read_manifest,
    read_prediction_file,
    read_score_file,
    write_manifest,
    write_prediction_file,
    write_score_file,
)
from multiplicity.models import PredictionRecord, PredictionSet, RunConfig, RunManifest, ScoreRecord


def write_lines(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


def test_reads_valid_file_in_order(tmp_path):
    path = write_lines(
        tmp_path / "preds.jsonl",
        [
            {"sample_id": "b", "logits": [0.1, 0.2], "label": 1, "groups": {"style": "gray"}},
            {"sample_id": "a", "logits": [0.3, -0.2], "label": 0, "groups": {}},
            {"sample_id": "c", "logits": [1.0, 2.0], "label": 1, "groups": {}},
        ],
    )
    preds = read_prediction_file(path)
    assert [r.sample_id for r in preds.records] == ["b", "a", "c"]
    assert preds.num_classes == 2


def test_inconsistent_class_count_names_line(tmp_path):
    path = write_lines(
        tmp_path / "preds.jsonl",
        [
            {"sample_id": "a", "logits": [0.1, 0.2], "label": 0},
            {"sample_id": "b", "logits": [0.1, 0.2, 0.3], "label": 0},
        ],
    )
    with pytest.raises(PredictionFileError, match="line 2") as excinfo:
        read_prediction_file(path)
    assert excinfo.value.line == 2


def test_malformed_line_reports_line_number(tmp_path):
    path = tmp_path / "preds.jsonl"
    path.write_text('{"sample_id": "a", "logits": [0.1, 0.2], "label": 0}\n{not json\n')
    with pytest.raises(PredictionFileError, match="line 2"):
        read_prediction_file(path)


def test_duplicate_id_and_label_range(tmp_path):
    duplicate = write_lines(
        tmp_path / "dup.jsonl",
        [
            {"sample_id": "a", "logits": [0.1, 0.2], "label": 0},
            {"sample_id": "a", "logits": [0.1, 0.2], "label": 1},
        ],
    )
    with pytest.raises(PredictionFileError, match="duplicate"):
        read_prediction_file(duplicate)

    out_of_range = write_lines(
        tmp_path / "label.jsonl", [{"sample_id": "a", "logits": [0.1, 0.2], "label": 5}]
    )
    with pytest.raises(PredictionFileError, match="line 1"):
        read_prediction_file(out_of_range)


def test_empty_file_has_no_records(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    with pytest.raises(PredictionFileError, match="no records"):
        read_prediction_file(path)


def test_write_then_read_reproduces_set(tmp_path, rng):
    preds = PredictionSet(
        run=RunConfig(seed=4),
        eval_set="ood-a",
        records=[
            PredictionRecord(
                sample_id=f"ood-a/{i:06d}",
                logits=rng.normal(size=3).tolist(),
                label=i % 3,
                groups={"age_band": "old", "name": "Zoë 名前"},
            )
            for i in range(100)
        ],
    )
    path = write_prediction_file(preds, tmp_path / "preds.jsonl")
    assert read_prediction_file(path, run=RunConfig(seed=4), eval_set="ood-a") == preds
    assert "Zoë 名前" in path.read_text(encoding="utf-8")


def test_refuses_non_finite_logits(tmp_path):
    record = PredictionRecord.model_construct(
        sample_id="a", logits=[float("nan"), 0.0], label=0, groups={}
    )
    preds = PredictionSet.model_construct(run=None, eval_set="in-dist", records=[record])
    with pytest.raises(ValueError, match="non-finite"):
        write_prediction_file(preds, tmp_path / "preds.jsonl")
    assert not (tmp_path / "preds.jsonl").exists()


def test_score_file_round_trip(tmp_path):
    scores = [
        ScoreRecord(run=RunConfig(seed=seed), metric_id="accuracy", score=90.0 + seed / 3)
        for seed in range(5)
    ]
    path = write_score_file(scores, tmp_path / "scores.jsonl")
    assert read_score_file(path) == scores


def test_score_file_errors_name_line(tmp_path):
    path = tmp_path / "scores.jsonl"
    line = ScoreRecord(run=RunConfig(), metric_id="a", score=50.0).model_dump_json()
    path.write_text(line + "\n" + line.replace("50.0", "150.0") + "\n")
    with pytest.raises(PredictionFileError, match="line 2"):
        read_score_file(path)


def test_manifest_round_trip(tmp_path):
    manifest = RunManifest(
        **RunConfig(optimizer="adam").model_dump(),
        predictions={"in-dist": "preds-in-dist.jsonl"},
        fingerprint="abc",
    )
    path = write_manifest(manifest, tmp_path / "run" / "manifest.json")
    assert read_manifest(path) == manifest
    with pytest.raises(FileNotFoundError):
        read_manifest(tmp_path / "missing.json")
