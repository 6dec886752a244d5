import csv
import io
import logging
from decimal import ROUND_HALF_UP, Decimal
from enum import StrEnum
from pathlib import Path
from typing import Self

from jinja2 import Environment, FileSystemLoader
from pydantic import BaseModel, ConfigDict, Field, model_validator

from multiplicity.models import AXIS_NAMES, RunConfig
from multiplicity.sheets.builder import MultiplicitySheet, SheetTable

logger = logging.getLogger(__name__)

TEMPLATE_DIR = Path(__file__).parent / "templates"
COLUMN_WIDTH = 10

RGB = tuple[int, int, int]


class SheetFormat(StrEnum):
    TEXT = "text"
    CSV = "csv"
    HTML = "html"

    @property
    def extension(self) -> str:
        return "txt" if self is SheetFormat.TEXT else self.value


class HeatmapConfig(BaseModel):
    """Cell colours run linearly from `low_color` at the bottom of a range to
    the metric colour at the top; values outside the range are clamped."""

    model_config = ConfigDict(frozen=True)

    raw_range: tuple[float, float] = Field(default=(0.0, 100.0))
    delta_range: tuple[float, float] = Field(default=(0.0, 5.0))
    raw_color: RGB = Field(default=(78, 123, 38))
    delta_color: RGB = Field(default=(96, 96, 96))
    low_color: RGB = Field(default=(255, 255, 255))

    @model_validator(mode="after")
    def _ordered_ranges(self) -> Self:
        for name in ("raw_range", "delta_range"):
            low, high = getattr(self, name)
            if not low < high:
                raise ValueError(f"{name} must be increasing, got {(low, high)}")
        for name in ("raw_color", "delta_color", "low_color"):
            if any(not 0 <= channel <= 255 for channel in getattr(self, name)):
                raise ValueError(f"{name} channels must lie in [0, 255]")
        return self


def round_half_away(value: float) -> str:
    """Two decimals, ties away from zero (format() would round half to even)."""
    return str(Decimal(repr(float(value))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def format_choice(value: object) -> str:
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)


def describe_default(config: RunConfig) -> str:
    return "; ".join(f"{axis}={format_choice(getattr(config, axis))}" for axis in AXIS_NAMES)


def blend(value: float, value_range: tuple[float, float], low: RGB, high: RGB) -> str:
    start, stop = value_range
    weight = min(max((value - start) / (stop - start), 0.0), 1.0)
    channels = (round(a + (b - a) * weight) for a, b in zip(low, high))
    return "#" + "".join(f"{channel:02x}" for channel in channels)


def render_text(sheet: MultiplicitySheet) -> str:
    lines = [f"Metric: {sheet.metric_id}"]
    if sheet.dataset:
        lines.append(f"Dataset: {sheet.dataset}")
    lines += [
        f"Default config: {describe_default(sheet.default_config)}",
        f"Delta max (all): {round_half_away(sheet.delta_max_all)}",
    ]
    for table in sheet.tables:
        lines += ["", f"Table: {table.axis_name}", _text_row("seed", table.choices, "delta_max")]
        for seed, row, row_delta in zip(table.seeds, table.cells, table.row_deltas):
            lines.append(_text_row(seed, map(round_half_away, row), round_half_away(row_delta)))
        lines.append(_text_row("delta_max", map(round_half_away, table.col_deltas)))
    return "\n".join(lines) + "\n"


def _text_row(label: object, cells, trailing: str | None = None) -> str:
    line = str(label).ljust(COLUMN_WIDTH)
    line += "".join(format_choice(cell).rjust(COLUMN_WIDTH) for cell in cells)
    if trailing is not None:
        line += trailing.rjust(COLUMN_WIDTH)
    return line.rstrip()


def render_csv(sheet: MultiplicitySheet) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    for index, table in enumerate(sheet.tables):
        if index:
            writer.writerow([])
        writer.writerow([table.axis_name, *map(format_choice, table.choices), "delta_max"])
        for seed, row, row_delta in zip(table.seeds, table.cells, table.row_deltas):
            writer.writerow([seed, *map(round_half_away, row), round_half_away(row_delta)])
        writer.writerow(["delta_max", *map(round_half_away, table.col_deltas)])
    writer.writerow([])
    writer.writerow(["delta_max_all", round_half_away(sheet.delta_max_all)])
    return buffer.getvalue()


def _html_table(table: SheetTable, palette: HeatmapConfig) -> dict:
    def cell(value: float, kind: str) -> dict:
        if kind == "raw":
            color = blend(value, palette.raw_range, palette.low_color, palette.raw_color)
        else:
            color = blend(value, palette.delta_range, palette.low_color, palette.delta_color)
        return {"text": round_half_away(value), "color": color}

    return {
        "axis_name": table.axis_name,
        "choices": [format_choice(choice) for choice in table.choices],
        "rows": [
            {
                "seed": seed,
                "cells": [cell(value, "raw") for value in row],
                "delta": cell(row_delta, "delta"),
            }
            for seed, row, row_delta in zip(table.seeds, table.cells, table.row_deltas)
        ],
        "col_deltas": [cell(value, "delta") for value in table.col_deltas],
    }


def render_html(sheet: MultiplicitySheet, palette: HeatmapConfig) -> str:
    env = Environment(loader=FileSystemLoader(TEMPLATE_DIR), autoescape=True)
    template = env.get_template("sheet.html.j2")
    return template.render(
        metric_id=sheet.metric_id,
        dataset=sheet.dataset,
        default_config=describe_default(sheet.default_config),
        delta_max_all=round_half_away(sheet.delta_max_all),
        tables=[_html_table(table, palette) for table in sheet.tables],
    )


def render(
    sheet: MultiplicitySheet,
    format: SheetFormat | str,
    palette: HeatmapConfig | None = None,
) -> str:
    match SheetFormat(format):
        case SheetFormat.TEXT:
            return render_text(sheet)
        case SheetFormat.CSV:
            return render_csv(sheet)
        case SheetFormat.HTML:
            return render_html(sheet, palette or HeatmapConfig())
