import logging
from pathlib import Path
from typing import Annotated, Optional

import typer

from multiplicity.cli.common import exit_on_error, state_of

logger = logging.getLogger(__name__)


def report(
    ctx: typer.Context,
    scores: Annotated[
        Optional[Path], typer.Option("--scores", help="Score file (default: <out>/scores.jsonl)")
    ] = None,
) -> None:
    """Per-metric overview: delta max over the sheet, score range and prediction mismatch."""
    with exit_on_error("report"):
        pipeline = state_of(ctx).pipeline()
        paths = pipeline.write_report(pipeline.read_scores(scores))
    for path in paths:
        typer.echo(str(path))
