import logging

import pytest
from pydantic import ValidationError

from multiplicity.grid import expand_grid
from multiplicity.models import GridAxis, GridSpec, RunConfig, ScoreRecord
from multiplicity.sheets.builder import SheetTable, build_sheet, delta_max, distribution
from multiplicity.sheets.fixtures import load_fixture

GRID = GridSpec(
    axes=[
        GridAxis(name="learning_rate", values=[0.1, 0.01]),
        GridAxis(name="optimizer", values=["sgd", "adam"]),
    ],
    seeds=[0, 1, 2],
)


def scores_for(grid: GridSpec, value, metric_id="accuracy") -> list[ScoreRecord]:
    return [
        ScoreRecord(run=run, metric_id=metric_id, score=value(run))
        for run in expand_grid(grid)
    ]


def varied(run: RunConfig) -> float:
    return 80.0 + run.seed + (5.0 if run.learning_rate == 0.01 else 0.0) + (
        0.5 if run.optimizer == "adam" else 0.0
    )


@pytest.mark.parametrize(
    "values, expected",
    [([89.56, 88.15, 88.15], 1.41), ([87.45, 89.56, 89.00], 2.11), ([42.0], 0.0)],
)
def test_delta_max(values, expected):
    assert delta_max(values) == pytest.approx(expected, abs=1e-9)


def test_delta_max_of_nothing():
    with pytest.raises(ValueError):
        delta_max([])


def test_tables_share_default_column():
    sheet = build_sheet(scores_for(GRID, varied), GRID, "accuracy")
    lr, opt = sheet.tables
    assert lr.choices == [0.1, 0.01] and opt.choices == ["sgd", "adam"]
    assert [row[0] for row in lr.cells] == [row[0] for row in opt.cells] == [80.0, 81.0, 82.0]
    assert lr.row_deltas == [5.0, 5.0, 5.0]
    assert lr.col_deltas == [2.0, 2.0]
    assert sheet.delta_max_all == 7.0
    assert sheet.default_config == RunConfig()


def test_constant_sheet_is_all_zero():
    sheet = build_sheet(scores_for(GRID, lambda run: 90.0), GRID, "accuracy")
    assert sheet.delta_max_all == 0.0
    for table in sheet.tables:
        assert set(table.row_deltas) == {0.0} and set(table.col_deltas) == {0.0}


def test_missing_score_names_the_run():
    scores = scores_for(GRID, varied)[1:]
    with pytest.raises(ValueError, match="seed=0"):
        build_sheet(scores, GRID, "accuracy")


def test_duplicate_score_is_an_error():
    scores = scores_for(GRID, varied)
    with pytest.raises(ValueError, match="duplicate"):
        build_sheet(scores + scores[:1], GRID, "accuracy")


def test_other_metrics_are_ignored_and_extra_runs_warned(caplog):
    scores = scores_for(GRID, varied) + scores_for(GRID, lambda run: 1.0, "other")
    scores.append(ScoreRecord(run=RunConfig(batch_size=7), metric_id="accuracy", score=1.0))
    with caplog.at_level(logging.WARNING):
        sheet = build_sheet(scores, GRID, "accuracy")
    assert sheet.delta_max_all == 7.0
    assert "outside the grid" in caplog.text


def test_seed_permutation_permutes_rows():
    sheet = build_sheet(scores_for(GRID, varied), GRID, "accuracy")
    flipped = build_sheet(scores_for(GRID, varied), GRID.with_seeds([2, 1, 0]), "accuracy")
    for table, other in zip(sheet.tables, flipped.tables):
        assert other.cells == table.cells[::-1]
        assert other.row_deltas == table.row_deltas[::-1]
        assert sorted(other.col_deltas) == sorted(table.col_deltas)
    assert flipped.delta_max_all == sheet.delta_max_all


def test_grid_without_axes_yields_seed_table():
    grid = GridSpec(seeds=[0, 1])
    sheet = build_sheet(scores_for(grid, lambda run: 50.0 + run.seed), grid, "accuracy")
    assert [t.axis_name for t in sheet.tables] == ["seed"]
    assert sheet.delta_max_all == 1.0


def test_learning_rate_column_of_published_table():
    scores, grid = load_fixture("utkface-accuracy")
    sheet = build_sheet(scores, grid, "accuracy")
    column = sheet.table("learning_rate").columns()[0]
    assert column == [92.85, 92.89, 92.47, 93.17, 92.60]
    assert sheet.table("learning_rate").col_deltas[0] == pytest.approx(0.70, abs=1e-9)
    assert sheet.delta_max_all == pytest.approx(1.12, abs=1e-9)


def test_table_rejects_inconsistent_deltas():
    with pytest.raises(ValidationError, match="row deltas"):
        SheetTable(
            axis_name="batch_size",
            choices=[128, 256],
            seeds=[0],
            cells=[[1.0, 2.0]],
            row_deltas=[0.5],
            col_deltas=[0.0, 0.0],
        )


def test_distribution_over_subset():
    scores = scores_for(GRID, varied)
    everything = distribution(scores, "accuracy")
    assert (everything.count, everything.min, everything.max) == (9, 80.0, 87.0)
    subset = {RunConfig(seed=1), RunConfig(seed=2)}
    picked = distribution(scores, "accuracy", runs=subset)
    assert (picked.count, picked.range, picked.mean) == (2, 1.0, 81.5)
    empty = distribution(scores, "accuracy", runs=set())
    assert empty.count == 0 and empty.range is None
