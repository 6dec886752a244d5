import logging
from pathlib import Path
from typing import Annotated, Optional

import typer

from multiplicity.cli.commands import evaluate, fixtures, report, select, sheet, train
from multiplicity.cli.common import CliState
from multiplicity.core.config import settings

app = typer.Typer(
    name="multiplicity",
    help="Model multiplicity benchmarking: train a grid, score it, build sheets, select runs.",
    no_args_is_help=True,
)

app.command("train-grid")(train.train_grid)
app.command("eval")(evaluate.evaluate)
app.command("sheet")(sheet.sheet)
app.command("select")(select.select)
app.command("report")(report.report)
app.add_typer(fixtures.app, name="fixtures")


@app.callback()
def main(
    ctx: typer.Context,
    config: Annotated[
        Optional[Path], typer.Option("--config", "-c", help="Pipeline TOML file")
    ] = None,
    out: Annotated[
        Optional[Path], typer.Option("--out", "-o", help="Output directory")
    ] = None,
    jobs: Annotated[
        Optional[int], typer.Option("--jobs", "-j", min=1, help="Concurrent runs")
    ] = None,
    seed_override: Annotated[
        Optional[list[int]],
        typer.Option("--seed-override", help="Replace the grid seeds (repeatable)"),
    ] = None,
    log_level: Annotated[
        str, typer.Option("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    ] = settings.log_level,
) -> None:
    logging.basicConfig(
        level=getattr(logging, log_level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    ctx.obj = CliState(
        config_path=config,
        output_dir=out,
        jobs=jobs if jobs is not None else settings.jobs,
        seed_override=list(seed_override or []),
    )


if __name__ == "__main__":
    app()
