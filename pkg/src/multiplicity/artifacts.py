"""
Line-delimited artifact files: predictions, scores and run manifests.
"""

import logging
import math
from pathlib import Path

from pydantic import ValidationError

from multiplicity.integration.files import atomic_write_text
from multiplicity.models import (
    PredictionRecord,
    PredictionSet,
    RunConfig,
    RunManifest,
    ScoreRecord,
)

logger = logging.getLogger(__name__)


class PredictionFileError(ValueError):
    """A prediction or score file could not be parsed; carries the line number."""

    def __init__(self, path: Path, line: int | None, reason: str):
        self.path = path
        self.line = line
        where = f"{path}, line {line}" if line is not None else f"{path}"
        super().__init__(f"{where}: {reason}")


def _read_lines(path: Path) -> list[tuple[int, str]]:
    path = Path(path)
    if not path.exists():
        raise PredictionFileError(path, None, "file not found")
    with open(path, "r", encoding="utf-8") as file:
        return [
            (number, line)
            for number, line in enumerate(file, start=1)
            if line.strip()
        ]


def read_prediction_file(
    path: Path, run: RunConfig | None = None, eval_set: str = "in-dist"
) -> PredictionSet:
    """
    Read a line-delimited prediction file.

    Args:
        path: File with one JSON record per line
        run: Run that produced the predictions, if known
        eval_set: Evaluation set tag for the returned set

    Returns:
        The validated PredictionSet, records in file order

    Raises:
        PredictionFileError: On malformed lines, inconsistent class counts,
            duplicate sample ids, out-of-range labels or an empty file
    """
    path = Path(path)
    lines = _read_lines(path)
    if not lines:
        raise PredictionFileError(path, None, "no records")

    records: list[PredictionRecord] = []
    seen: set[str] = set()
    for number, line in lines:
        try:
            record = PredictionRecord.model_validate_json(line)
        except ValidationError as e:
            raise PredictionFileError(path, number, _first_error(e)) from e

        if records and len(record.logits) != len(records[0].logits):
            raise PredictionFileError(
                path,
                number,
                f"inconsistent class count: {len(record.logits)} logits, "
                f"expected {len(records[0].logits)}",
            )
        if record.sample_id in seen:
            raise PredictionFileError(
                path, number, f"duplicate sample_id {record.sample_id!r}"
            )
        seen.add(record.sample_id)
        records.append(record)

    logger.debug(f"Read {len(records)} predictions from {path}")
    return PredictionSet(run=run, eval_set=eval_set, records=records)


def write_prediction_file(prediction_set: PredictionSet, path: Path) -> Path:
    """Write one JSON record per line; refuses non-finite logits."""
    lines = []
    for record in prediction_set.records:
        if not all(math.isfinite(v) for v in record.logits):
            raise ValueError(
                f"refusing to write non-finite logits for {record.sample_id!r}"
            )
        lines.append(record.model_dump_json())

    path = atomic_write_text(Path(path), "".join(line + "\n" for line in lines))
    logger.debug(f"Wrote {len(lines)} predictions to {path}")
    return path


def read_score_file(path: Path) -> list[ScoreRecord]:
    path = Path(path)
    scores = []
    for number, line in _read_lines(path):
        try:
            scores.append(ScoreRecord.model_validate_json(line))
        except ValidationError as e:
            raise PredictionFileError(path, number, _first_error(e)) from e
    return scores


def write_score_file(scores: list[ScoreRecord], path: Path) -> Path:
    lines = []
    for score in scores:
        if not (math.isfinite(score.score) and 0.0 <= score.score <= 100.0):
            raise ValueError(
                f"refusing to write score {score.score} for {score.metric_id}"
            )
        lines.append(score.model_dump_json())
    return atomic_write_text(Path(path), "".join(line + "\n" for line in lines))


def read_manifest(path: Path) -> RunManifest:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Manifest not found: {path}")
    try:
        return RunManifest.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise ValueError(f"Invalid manifest {path}: {_first_error(e)}") from e


def write_manifest(manifest: RunManifest, path: Path) -> Path:
    return atomic_write_text(Path(path), manifest.model_dump_json(indent=2) + "\n")


def _first_error(error: ValidationError) -> str:
    details = error.errors()
    if not details:
        return str(error)
    first = details[0]
    location = ".".join(str(part) for part in first.get("loc", ()))
    if first.get("type") == "json_invalid":
        return f"malformed record: {first.get('msg')}"
    return f"{location}: {first.get('msg')}" if location else first.get("msg", "")
