import csv
import io
from pathlib import Path

import pytest
from pydantic import ValidationError

from multiplicity.grid import expand_grid
from multiplicity.models import GridAxis, GridSpec, ScoreRecord
from multiplicity.sheets.builder import build_sheet
from multiplicity.sheets.fixtures import load_fixture
from multiplicity.sheets.render import (
    HeatmapConfig,
    SheetFormat,
    blend,
    render,
    render_csv,
    render_html,
    render_text,
    round_half_away,
)

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="module")
def utkface_accuracy():
    scores, grid = load_fixture("utkface-accuracy")
    return build_sheet(scores, grid, "accuracy", dataset="UTKFace")


@pytest.fixture
def constant_sheet():
    grid = GridSpec(axes=[GridAxis(name="batch_size", values=[128, 256])], seeds=[0, 1])
    scores = [ScoreRecord(run=run, metric_id="acc", score=75.0) for run in expand_grid(grid)]
    return build_sheet(scores, grid, "acc")


@pytest.mark.parametrize(
    "value, expected",
    [(0.125, "0.13"), (2.675, "2.68"), (-0.125, "-0.13"), (1.0, "1.00"), (0.004999, "0.00")],
)
def test_round_half_away(value, expected):
    assert round_half_away(value) == expected


def test_text_matches_golden_file(utkface_accuracy):
    golden = (DATA_DIR / "utkface-accuracy.txt").read_text(encoding="utf-8")
    assert render_text(utkface_accuracy) == golden


def test_csv_reproduces_rounded_cells(utkface_accuracy):
    rows = list(csv.reader(io.StringIO(render_csv(utkface_accuracy))))
    assert rows[0] == ["learning_rate", "0.1", "0.05", "0.01", "delta_max"]
    assert rows[1][1:4] == [round_half_away(v) for v in utkface_accuracy.tables[0].cells[0]]
    assert rows[-1] == ["delta_max_all", "1.12"]


def test_constant_sheet_renders_zero_deltas(constant_sheet):
    rows = list(csv.reader(io.StringIO(render_csv(constant_sheet))))
    assert rows[1] == ["0", "75.00", "75.00", "0.00"]
    assert rows[3] == ["delta_max", "0.00", "0.00"]
    assert "Delta max (all): 0.00" in render_text(constant_sheet)


def test_html_colours_cells(utkface_accuracy):
    palette = HeatmapConfig(raw_range=(92.0, 94.0), delta_range=(0.0, 2.0))
    page = render_html(utkface_accuracy, palette)
    assert page.count("<table>") == 5
    assert "93.17" in page and "1.12" in page
    assert f"background-color: {blend(93.17, (92.0, 94.0), palette.low_color, palette.raw_color)}" in page


def test_html_escapes_names(constant_sheet):
    sheet = constant_sheet.model_copy(update={"metric_id": "<script>"})
    assert "<script>" not in render_html(sheet, HeatmapConfig())


def test_blend_interpolates_and_clamps():
    white, black = (255, 255, 255), (0, 0, 0)
    assert blend(50.0, (0.0, 100.0), white, black) == "#808080"
    assert blend(-5.0, (0.0, 100.0), white, black) == "#ffffff"
    assert blend(500.0, (0.0, 100.0), white, black) == "#000000"


def test_render_dispatch(constant_sheet):
    assert render(constant_sheet, "csv") == render_csv(constant_sheet)
    assert render(constant_sheet, SheetFormat.TEXT) == render_text(constant_sheet)
    assert render(constant_sheet, "html").startswith("<!DOCTYPE html>")
    assert SheetFormat.TEXT.extension == "txt"
    with pytest.raises(ValueError):
        render(constant_sheet, "pdf")


def test_rendering_keeps_full_precision(utkface_accuracy):
    before = utkface_accuracy.model_dump()
    for sheet_format in SheetFormat:
        render(utkface_accuracy, sheet_format)
    assert utkface_accuracy.model_dump() == before


def test_heatmap_ranges_must_increase():
    with pytest.raises(ValidationError):
        HeatmapConfig(raw_range=(5.0, 5.0))
    with pytest.raises(ValidationError):
        HeatmapConfig(raw_color=(300, 0, 0))
