"""
Published multiplicity tables bundled as fixtures.

Each data file holds the two-decimal cells of every table together with the
printed row/column deltas, the printed sheet-wide delta and the published
heatmap ranges.
"""

import logging
from functools import cache
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from multiplicity.models import GridAxis, GridSpec, RunConfig, ScoreRecord
from multiplicity.sheets.render import HeatmapConfig

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"


class FixtureTable(BaseModel):
    model_config = ConfigDict(frozen=True)

    axis: str
    choices: list[float | int | str]
    cells: list[list[float]]
    row_deltas: list[float] = Field(description="Printed row deltas")
    col_deltas: list[float] = Field(description="Printed column deltas")


class Fixture(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    dataset: str
    metric: str = Field(description="Metric label as printed")
    notes: str = ""
    default: RunConfig
    seeds: list[int]
    tables: list[FixtureTable]
    delta_max_all: float = Field(description="Printed sheet-wide delta")
    heatmap: HeatmapConfig

    @property
    def metric_id(self) -> str:
        return self.name.split("-", 1)[1]

    @property
    def grid(self) -> GridSpec:
        return GridSpec(
            default=self.default,
            axes=[GridAxis(name=t.axis, values=t.choices) for t in self.tables],
            seeds=self.seeds,
        )

    def scores(self) -> list[ScoreRecord]:
        """One record per run; the shared default column is emitted once."""
        by_run: dict[RunConfig, float] = {}
        for table in self.tables:
            for seed, row in zip(self.seeds, table.cells):
                for choice, value in zip(table.choices, row):
                    run = self.default.with_value(table.axis, choice).with_value("seed", seed)
                    if by_run.setdefault(run, value) != value:
                        raise ValueError(
                            f"fixture {self.name}: conflicting values for ({run.describe()})"
                        )
        return [
            ScoreRecord(run=run, metric_id=self.metric_id, score=value)
            for run, value in by_run.items()
        ]


def list_fixtures() -> list[str]:
    return sorted(path.stem for path in DATA_DIR.glob("*.json"))


@cache
def get_fixture(name: str) -> Fixture:
    path = DATA_DIR / f"{name}.json"
    if not path.exists():
        raise ValueError(f"Unknown fixture {name!r}; available: {', '.join(list_fixtures())}")
    try:
        return Fixture.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        logger.error(f"Bundled fixture {name} is invalid: {e}")
        raise


def load_fixture(name: str) -> tuple[list[ScoreRecord], GridSpec]:
    fixture = get_fixture(name)
    return fixture.scores(), fixture.grid
