import logging
from pathlib import Path
from typing import Annotated, Optional

import typer

from multiplicity.cli.common import ExitCode, UsageError, exit_on_error, state_of

logger = logging.getLogger(__name__)


def select(
    ctx: typer.Context,
    k: Annotated[
        Optional[list[float]],
        typer.Option("--k", help="Top-k% level (repeatable; default: from config)"),
    ] = None,
    scores: Annotated[
        Optional[Path], typer.Option("--scores", help="Score file (default: <out>/scores.jsonl)")
    ] = None,
) -> None:
    """Keep runs in the top k% of every criterion and report unforeseen metrics."""
    with exit_on_error("select"):
        pipeline = state_of(ctx).pipeline()
        if pipeline.config.selection is None:
            raise UsageError("config has no [selection] section")
        outcomes = pipeline.select(pipeline.read_scores(scores), k or None)

    empty = []
    for report, paths in outcomes:
        typer.echo(f"k={report.k:g}: {len(report.selected)} of {report.total} runs selected")
        for path in paths:
            typer.echo(f"  {path}")
        if report.is_empty:
            empty.append(report.stage)

    if empty:
        logger.warning(f"Empty selection at {', '.join(empty)}")
        raise typer.Exit(ExitCode.EMPTY_SELECTION)
