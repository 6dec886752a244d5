"""
Multiplicity sheets: seed x choice tables sharing a default column, with
per-row and per-column max-minus-min deltas and one sheet-wide delta.
"""

import logging
import math
from typing import Self

from pydantic import BaseModel, ConfigDict, Field, model_validator

from multiplicity.grid import expand_grid
from multiplicity.models import GridSpec, RunConfig, ScoreRecord

logger = logging.getLogger(__name__)


def delta_max(values: list[float]) -> float:
    values = list(values)
    if not values:
        raise ValueError("delta_max of an empty list is undefined")
    return max(values) - min(values)


class SheetTable(BaseModel):
    """Rows are seeds, columns are choices of one axis (default first)."""

    model_config = ConfigDict(frozen=True)

    axis_name: str
    choices: list[float | int | str] = Field(min_length=1)
    seeds: list[int] = Field(min_length=1)
    cells: list[list[float]] = Field(description="cells[seed][choice], full precision")
    row_deltas: list[float]
    col_deltas: list[float]

    @model_validator(mode="after")
    def _consistent(self) -> Self:
        if len(self.cells) != len(self.seeds) or any(
            len(row) != len(self.choices) for row in self.cells
        ):
            raise ValueError(
                f"table {self.axis_name}: cells must be {len(self.seeds)} x {len(self.choices)}"
            )
        if self.row_deltas != [delta_max(row) for row in self.cells]:
            raise ValueError(f"table {self.axis_name}: row deltas do not match cells")
        if self.col_deltas != [delta_max(column) for column in self.columns()]:
            raise ValueError(f"table {self.axis_name}: column deltas do not match cells")
        return self

    @classmethod
    def from_cells(
        cls,
        axis_name: str,
        choices: list[float | int | str],
        seeds: list[int],
        cells: list[list[float]],
    ) -> "SheetTable":
        columns = [list(column) for column in zip(*cells)]
        return cls(
            axis_name=axis_name,
            choices=choices,
            seeds=seeds,
            cells=cells,
            row_deltas=[delta_max(row) for row in cells],
            col_deltas=[delta_max(column) for column in columns],
        )

    def columns(self) -> list[list[float]]:
        return [[row[j] for row in self.cells] for j in range(len(self.choices))]

    def values(self) -> list[float]:
        return [value for row in self.cells for value in row]


class MultiplicitySheet(BaseModel):
    model_config = ConfigDict(frozen=True)

    metric_id: str
    dataset: str = ""
    default_config: RunConfig = Field(description="Shared default, seed ignored")
    tables: list[SheetTable] = Field(min_length=1)
    delta_max_all: float

    @model_validator(mode="after")
    def _shared_default(self) -> Self:
        defaults = [[row[0] for row in table.cells] for table in self.tables]
        if any(column != defaults[0] for column in defaults[1:]):
            raise ValueError("default columns differ between tables")
        if self.delta_max_all != delta_max(self.values()):
            raise ValueError("delta_max_all does not match the cells")
        return self

    def values(self) -> list[float]:
        return [value for table in self.tables for value in table.values()]

    def table(self, axis_name: str) -> SheetTable:
        for table in self.tables:
            if table.axis_name == axis_name:
                return table
        raise ValueError(f"sheet {self.metric_id} has no table for {axis_name}")


def index_scores(scores: list[ScoreRecord], metric_id: str) -> dict[RunConfig, float]:
    """Scores of one metric keyed by run; a run scored twice is an error."""
    by_run: dict[RunConfig, float] = {}
    for score in scores:
        if score.metric_id != metric_id:
            continue
        if score.run in by_run:
            raise ValueError(
                f"duplicate {metric_id} score for run ({score.run.describe()})"
            )
        by_run[score.run] = score.score
    return by_run


def build_sheet(
    scores: list[ScoreRecord], grid: GridSpec, metric_id: str, dataset: str = ""
) -> MultiplicitySheet:
    """
    Assemble one table per grid axis from the scores of `metric_id`.

    Raises:
        ValueError: If a grid run has no score or a run is scored twice
    """
    by_run = index_scores(scores, metric_id)
    if not by_run:
        raise ValueError(f"no scores for metric {metric_id!r}")

    missing = [run for run in expand_grid(grid) if run not in by_run]
    if missing:
        raise ValueError(
            f"missing {metric_id} score for run ({missing[0].describe()})"
            + (f" and {len(missing) - 1} more" if len(missing) > 1 else "")
        )
    extra = len(by_run) - len(expand_grid(grid))
    if extra > 0:
        logger.warning(f"Ignoring {extra} {metric_id} scores for runs outside the grid")

    tables = []
    for axis in grid.axes:
        variants = grid.variants(axis.name)
        cells = [
            [by_run[variant.with_value("seed", seed)] for variant in variants]
            for seed in grid.seeds
        ]
        tables.append(
            SheetTable.from_cells(
                axis.name, [getattr(v, axis.name) for v in variants], grid.seeds, cells
            )
        )
    if not tables:
        # a grid without axes still has its default column
        cells = [[by_run[grid.default.with_value("seed", seed)]] for seed in grid.seeds]
        tables.append(SheetTable.from_cells("seed", ["default"], grid.seeds, cells))

    values = [value for table in tables for value in table.values()]
    return MultiplicitySheet(
        metric_id=metric_id,
        dataset=dataset,
        default_config=grid.seedless_default,
        tables=tables,
        delta_max_all=delta_max(values),
    )


class Distribution(BaseModel):
    """Summary of one metric over a set of runs; statistics are None when count is 0."""

    model_config = ConfigDict(frozen=True)

    metric_id: str
    count: int = Field(ge=0)
    min: float | None = None
    max: float | None = None
    range: float | None = None
    mean: float | None = None


def distribution(
    scores: list[ScoreRecord], metric_id: str, runs: set[RunConfig] | None = None
) -> Distribution:
    by_run = index_scores(scores, metric_id)
    values = [score for run, score in by_run.items() if runs is None or run in runs]
    if not values:
        return Distribution(metric_id=metric_id, count=0)
    return Distribution(
        metric_id=metric_id,
        count=len(values),
        min=min(values),
        max=max(values),
        range=delta_max(values),
        mean=math.fsum(values) / len(values),
    )
