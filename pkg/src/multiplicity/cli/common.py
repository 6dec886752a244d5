import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterator

import typer
from pydantic import ValidationError

from multiplicity.core.config import settings
from multiplicity.services.pipeline.schemas import (
    ConfigError,
    PipelineConfig,
    load_pipeline_config,
)
from multiplicity.services.pipeline.service import MultiplicityPipeline

logger = logging.getLogger(__name__)


class ExitCode(IntEnum):
    OK = 0
    VALIDATION = 1
    RUNTIME = 2
    EMPTY_SELECTION = 3


class UsageError(ValueError):
    """Bad command-line input such as an unknown metric or fixture name."""


@dataclass
class CliState:
    config_path: Path | None = None
    output_dir: Path | None = None
    jobs: int = 1
    seed_override: list[int] = field(default_factory=list)

    def load_config(self) -> PipelineConfig:
        if self.config_path is None:
            raise UsageError("this command needs --config")
        return load_pipeline_config(self.config_path, self.seed_override or None)

    def resolve_output_dir(self, config: PipelineConfig | None = None) -> Path:
        if self.output_dir is not None:
            return self.output_dir
        if config is not None and config.output_dir is not None:
            return config.output_dir
        return settings.output_dir

    def pipeline(self) -> MultiplicityPipeline:
        config = self.load_config()
        return MultiplicityPipeline(
            config=config, output_dir=self.resolve_output_dir(config), jobs=self.jobs
        )


def state_of(ctx: typer.Context) -> CliState:
    return ctx.ensure_object(CliState)


@contextmanager
def exit_on_error(action: str) -> Iterator[None]:
    """Translate exceptions into the documented exit codes."""
    try:
        yield
    except typer.Exit:
        raise
    except (ValidationError, ConfigError, UsageError) as e:
        logger.error(f"Invalid input for {action}: {e}")
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(ExitCode.VALIDATION) from e
    except (ValueError, OSError) as e:
        logger.error(f"Error during {action}: {e}", exc_info=True)
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(ExitCode.RUNTIME) from e
