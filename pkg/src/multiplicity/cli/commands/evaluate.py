import asyncio
import logging

import typer

from multiplicity.cli.common import exit_on_error, state_of

logger = logging.getLogger(__name__)


def evaluate(ctx: typer.Context) -> None:
    """Score every trained run on every configured metric."""
    with exit_on_error("eval"):
        pipeline = state_of(ctx).pipeline()
        scores = asyncio.run(pipeline.evaluate())
        typer.echo(f"{len(scores)} scores written to {pipeline.scores_path}")
