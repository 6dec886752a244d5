import logging
from pathlib import Path
from typing import Annotated, Optional

import typer

from multiplicity.cli.common import UsageError, exit_on_error, state_of
from multiplicity.services.pipeline.service import write_sheet
from multiplicity.sheets.builder import build_sheet
from multiplicity.sheets.fixtures import get_fixture, list_fixtures
from multiplicity.sheets.render import SheetFormat

logger = logging.getLogger(__name__)


def parse_formats(value: str) -> list[SheetFormat]:
    formats = []
    for part in value.split(","):
        try:
            formats.append(SheetFormat(part.strip()))
        except ValueError:
            raise UsageError(
                f"Unknown format {part.strip()!r}; expected any of "
                f"{[f.value for f in SheetFormat]}"
            ) from None
    return formats


def sheet(
    ctx: typer.Context,
    metric: Annotated[
        Optional[list[str]],
        typer.Option("--metric", "-m", help="Metric id (repeatable; default: all)"),
    ] = None,
    format: Annotated[
        str, typer.Option("--format", "-f", help="Comma-separated: text,csv,html")
    ] = "text",
    fixture: Annotated[
        Optional[str], typer.Option("--fixture", help="Render a bundled published table")
    ] = None,
    scores: Annotated[
        Optional[Path], typer.Option("--scores", help="Score file (default: <out>/scores.jsonl)")
    ] = None,
) -> None:
    """Build and render multiplicity sheets."""
    state = state_of(ctx)
    with exit_on_error("sheet"):
        formats = parse_formats(format)

        if fixture is not None:
            if fixture not in list_fixtures():
                raise UsageError(
                    f"Unknown fixture {fixture!r}; available: {', '.join(list_fixtures())}"
                )
            data = get_fixture(fixture)
            built = build_sheet(data.scores(), data.grid, data.metric_id, dataset=data.dataset)
            paths = write_sheet(
                built, formats, state.resolve_output_dir(), palette=data.heatmap, name=fixture
            )
        else:
            pipeline = state.pipeline()
            available = [m.metric_id for m in pipeline.config.metrics]
            unknown = [m for m in metric or [] if m not in available]
            if unknown:
                raise UsageError(f"Unknown metric ids {unknown}; available: {available}")
            records = pipeline.read_scores(scores)
            paths = []
            for built in pipeline.build_sheets(records, metric or None):
                paths += pipeline.write_sheet(built, formats)

        for path in paths:
            typer.echo(str(path))
