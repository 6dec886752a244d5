import asyncio
import logging
from typing import Annotated

import typer

from multiplicity.cli.common import exit_on_error, state_of

logger = logging.getLogger(__name__)


def train_grid(
    ctx: typer.Context,
    export_datasets: Annotated[
        bool,
        typer.Option("--export-datasets", help="Also write every dataset under <out>/data"),
    ] = False,
    export_attacks: Annotated[
        bool,
        typer.Option(
            "--export-attacks", help="Also write each run's predictions under every PGD metric"
        ),
    ] = False,
) -> None:
    """Train every run of the grid; completed runs are skipped."""
    with exit_on_error("train-grid"):
        pipeline = state_of(ctx).pipeline()
        manifests = asyncio.run(pipeline.train_grid())
        typer.echo(f"{len(manifests)} runs under {pipeline.runs_dir}")

        if export_datasets:
            for path in pipeline.export_datasets():
                typer.echo(f"Wrote {path}")
        if export_attacks:
            paths = asyncio.run(pipeline.export_attacks())
            typer.echo(f"{len(paths)} adversarial prediction files under {pipeline.runs_dir}")
