from pathlib import Path
from typing import Literal

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()


class Settings(BaseSettings):
    """Process settings loaded from environment variables and `.env`."""

    model_config = SettingsConfigDict(populate_by_name=True, extra="ignore")

    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = Field(
        default="INFO", alias="MULTIPLICITY_LOG_LEVEL", description="Root log level"
    )

    jobs: int = Field(
        default=1,
        alias="MULTIPLICITY_JOBS",
        ge=1,
        description="Runs trained or evaluated concurrently",
    )

    output_dir: Path = Field(
        default=Path("artifacts"),
        alias="MULTIPLICITY_OUTPUT_DIR",
        description="Root of the run, score, sheet and report tree",
    )


settings = Settings()  # type: ignore
