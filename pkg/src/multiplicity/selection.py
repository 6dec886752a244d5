"""
Top-k% selection on several metrics at once, and how the surviving runs
spread on metrics that took no part in the selection.
"""

import csv
import io
import logging
import math
from decimal import Decimal

from pydantic import BaseModel, ConfigDict, Field, field_validator

from multiplicity.models import RunConfig, ScoreRecord
from multiplicity.sheets.builder import Distribution, distribution, index_scores
from multiplicity.sheets.render import round_half_away

logger = logging.getLogger(__name__)


class SelectionSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    criteria: list[str] = Field(min_length=1, description="Metric ids a run must rank on")
    k: float = Field(gt=0.0, le=100.0, description="Percentage of runs kept per metric")

    @field_validator("criteria")
    @classmethod
    def _unique(cls, criteria: list[str]) -> list[str]:
        if len(set(criteria)) != len(criteria):
            raise ValueError(f"criteria must be unique, got {criteria}")
        return criteria


class MetricComparison(BaseModel):
    model_config = ConfigDict(frozen=True)

    metric_id: str
    before: Distribution
    after: Distribution


class SelectionReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    criteria: list[str]
    k: float
    total: int = Field(description="Runs considered before selection")
    selected: list[RunConfig] = Field(description="Selected runs in sort_key order")
    metrics: list[MetricComparison]

    @property
    def is_empty(self) -> bool:
        return not self.selected

    @property
    def stage(self) -> str:
        return f"k={self.k:g}"


def selection_size(k: float, total: int) -> int:
    # Decimal keeps e.g. 75% of 45 at exactly 33.75 before the ceiling
    return math.ceil(Decimal(str(k)) * total / 100)


def top_k(scores: list[ScoreRecord], k: float) -> set[RunConfig]:
    """
    The best ceil(k/100 * N) runs of one metric, highest score first, ties
    broken by RunConfig.sort_key.
    """
    if not 0 < k <= 100:
        raise ValueError(f"k must lie in (0, 100], got {k}")
    metric_ids = {score.metric_id for score in scores}
    if len(metric_ids) > 1:
        raise ValueError(f"top_k expects one metric, got {sorted(metric_ids)}")
    if not scores:
        return set()

    by_run = index_scores(scores, metric_ids.pop())
    ranked = sorted(by_run, key=lambda run: (-by_run[run], run.sort_key()))
    return set(ranked[: selection_size(k, len(ranked))])


def intersect_selection(spec: SelectionSpec, scores: list[ScoreRecord]) -> set[RunConfig]:
    per_metric = {
        metric_id: [score for score in scores if score.metric_id == metric_id]
        for metric_id in spec.criteria
    }
    missing = [metric_id for metric_id, records in per_metric.items() if not records]
    if missing:
        raise ValueError(f"no scores for selection criteria {missing}")

    run_sets = {metric_id: {s.run for s in records} for metric_id, records in per_metric.items()}
    reference_id = spec.criteria[0]
    for metric_id, runs in run_sets.items():
        if runs != run_sets[reference_id]:
            raise ValueError(
                f"criteria {reference_id} and {metric_id} were scored on different runs"
            )

    selected = set(run_sets[reference_id])
    for metric_id, records in per_metric.items():
        selected &= top_k(records, spec.k)
    logger.info(
        f"Top {spec.k:g}% on {len(spec.criteria)} criteria keeps "
        f"{len(selected)} of {len(run_sets[reference_id])} runs"
    )
    return selected


def unforeseen_report(
    selected: set[RunConfig],
    scores: list[ScoreRecord],
    unforeseen: list[str],
    spec: SelectionSpec,
) -> SelectionReport:
    metrics = []
    total = 0
    for metric_id in unforeseen:
        before = distribution(scores, metric_id)
        if before.count == 0:
            raise ValueError(f"no scores for unforeseen metric {metric_id!r}")
        total = max(total, before.count)
        metrics.append(
            MetricComparison(
                metric_id=metric_id,
                before=before,
                after=distribution(scores, metric_id, runs=selected),
            )
        )
    if not selected:
        logger.warning(f"Top {spec.k:g}% selection is empty; after-selection ranges undefined")

    return SelectionReport(
        criteria=spec.criteria,
        k=spec.k,
        total=total,
        selected=sorted(selected, key=RunConfig.sort_key),
        metrics=metrics,
    )


def _stat(value: float | None) -> str:
    return "undefined" if value is None else round_half_away(value)


def render_report_text(report: SelectionReport) -> str:
    lines = [
        f"Selection: top {report.k:g}% on every criterion",
        f"Criteria: {', '.join(report.criteria)}",
        f"Selected: {len(report.selected)} of {report.total} runs",
    ]
    if report.is_empty:
        lines.append("count=0: no run ranks in the top k% of every criterion")
    lines += ["", f"{'metric':<20}{'stage':<10}{'min':>10}{'max':>10}{'range':>10}{'count':>8}"]
    for comparison in report.metrics:
        for stage, dist in (("before", comparison.before), (report.stage, comparison.after)):
            lines.append(
                f"{comparison.metric_id:<20}{stage:<10}{_stat(dist.min):>10}"
                f"{_stat(dist.max):>10}{_stat(dist.range):>10}{dist.count:>8}"
            )
    if report.selected:
        lines += ["", "Selected runs:"]
        lines += [f"  {run.run_id}  {run.describe()}" for run in report.selected]
    return "\n".join(lines) + "\n"


def render_report_csv(report: SelectionReport) -> str:
    """Rows of (metric, stage, min, max, range, count) at full precision."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["metric", "stage", "min", "max", "range", "count"])
    for comparison in report.metrics:
        for stage, dist in (("before", comparison.before), (report.stage, comparison.after)):
            writer.writerow(
                [
                    comparison.metric_id,
                    stage,
                    *("" if v is None else repr(v) for v in (dist.min, dist.max, dist.range)),
                    dist.count,
                ]
            )
    return buffer.getvalue()
