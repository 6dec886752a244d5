import asyncio
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

from multiplicity.artifacts import (
    read_manifest,
    read_prediction_file,
    read_score_file,
    write_manifest,
    write_prediction_file,
    write_score_file,
)
from multiplicity.attacks import attack_dataset
from multiplicity.grid import expand_grid
from multiplicity.integration.files import atomic_write_text, fingerprint
from multiplicity.metrics import (
    IN_DIST,
    MetricKind,
    MismatchSummary,
    MissingArtifactError,
    RunArtifacts,
    evaluate_metric,
    mismatch_summary,
)
from multiplicity.models import RunConfig, RunManifest, ScoreRecord
from multiplicity.selection import (
    SelectionReport,
    SelectionSpec,
    intersect_selection,
    render_report_csv,
    render_report_text,
    unforeseen_report,
)
from multiplicity.services.pipeline.schemas import PipelineConfig
from multiplicity.sheets.builder import MultiplicitySheet, build_sheet, distribution
from multiplicity.sheets.render import HeatmapConfig, SheetFormat, render, round_half_away
from multiplicity.synthdata import (
    LabeledDataset,
    export_dataset,
    generate_shifted,
    generate_skewed,
)
from multiplicity.toymodel.serialization import load_params, save_params
from multiplicity.toymodel.training import fit, predict

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
PARAMS_NAME = "params.txt"
SCORES_NAME = "scores.jsonl"


def prediction_file_name(eval_set: str) -> str:
    return f"preds-{eval_set}.jsonl"


def default_palette(sheet: MultiplicitySheet) -> HeatmapConfig:
    """Ranges snapped outward to whole percentage points around the sheet's values."""
    values = sheet.values()
    low, high = math.floor(min(values)), math.ceil(max(values))
    if high <= low:
        high = low + 1
    return HeatmapConfig(
        raw_range=(low, high), delta_range=(0.0, max(1.0, math.ceil(sheet.delta_max_all)))
    )


def write_sheet(
    sheet: MultiplicitySheet,
    formats: list[SheetFormat],
    output_dir: Path,
    palette: HeatmapConfig | None = None,
    name: str | None = None,
) -> list[Path]:
    """Render `sheet` once per format under <output_dir>/sheets."""
    palette = palette or default_palette(sheet)
    paths = []
    for sheet_format in formats:
        path = Path(output_dir) / "sheets" / f"{name or sheet.metric_id}.{sheet_format.extension}"
        paths.append(atomic_write_text(path, render(sheet, sheet_format, palette)))
        logger.info(f"Wrote {path}")
    return paths


@dataclass
class OverviewRow:
    metric_id: str
    count: int
    min: float
    max: float
    mean: float
    delta_max_all: float | None = None


@dataclass
class MultiplicityPipeline:
    """Runs the train -> evaluate -> sheet -> select chain for one config."""

    config: PipelineConfig
    output_dir: Path
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        self.output_dir = Path(self.output_dir)

    @property
    def runs_dir(self) -> Path:
        return self.output_dir / "runs"

    @property
    def scores_path(self) -> Path:
        return self.output_dir / SCORES_NAME

    def run_dir(self, run: RunConfig) -> Path:
        return self.runs_dir / run.run_id

    @cached_property
    def runs(self) -> list[RunConfig]:
        return expand_grid(self.config.grid)

    @cached_property
    def training_set(self) -> LabeledDataset:
        return generate_skewed(self.config.dataset.base_spec(), eval_set="train")

    @cached_property
    def eval_sets(self) -> dict[str, LabeledDataset]:
        section = self.config.dataset
        datasets = {IN_DIST: generate_skewed(section.base_spec(seed=section.test_seed), IN_DIST)}
        for tag, shift in section.shifted.items():
            update: dict[str, object] = {
                "seed": shift.seed if shift.seed is not None else section.test_seed
            }
            if shift.samples_per_class is not None:
                update["samples_per_class"] = shift.samples_per_class
            datasets[tag] = generate_shifted(
                section.base_spec(**update), shift.shift, shift.stddev_scale, eval_set=tag
            )
        return datasets

    def prepare_data(self) -> None:
        """Generate the datasets once, before worker threads share them."""
        sizes = {tag: len(data) for tag, data in self.eval_sets.items()}
        logger.info(f"Training set: {len(self.training_set)} samples; eval sets: {sizes}")

    def fingerprint(self, run: RunConfig) -> str:
        return fingerprint(
            run.model_dump_json(),
            self.config.dataset.model_dump_json(),
            self.config.train.model_dump_json(),
        )

    async def _map_runs(self, function) -> list:
        """Apply `function` to every run in worker threads; results in grid order."""
        semaphore = asyncio.Semaphore(self.jobs)

        async def bounded(run: RunConfig):
            async with semaphore:
                return await asyncio.to_thread(function, run)

        return list(await asyncio.gather(*(bounded(run) for run in self.runs)))

    # training

    def completed_manifest(self, run: RunConfig) -> RunManifest | None:
        """The run's manifest if the run finished with the current settings."""
        directory = self.run_dir(run)
        manifest_path = directory / MANIFEST_NAME
        if not manifest_path.exists():
            if directory.exists():
                logger.warning(f"Run {run.run_id} has no manifest; treating it as partial")
            return None
        try:
            manifest = read_manifest(manifest_path)
        except ValueError as e:
            logger.warning(f"Run {run.run_id}: {e}; retraining")
            return None

        if manifest.fingerprint != self.fingerprint(run) or manifest.run != run:
            logger.warning(f"Run {run.run_id} was produced by different settings; retraining")
            return None
        expected = {manifest.params, *manifest.predictions.values()}
        if set(manifest.predictions) != set(self.eval_sets) or any(
            not (directory / name).exists() for name in expected
        ):
            logger.warning(f"Run {run.run_id} is missing artifacts; retraining")
            return None
        return manifest

    def train_run(self, run: RunConfig) -> RunManifest:
        existing = self.completed_manifest(run)
        if existing is not None:
            logger.info(f"Skipping run {run.run_id}: already complete")
            return existing

        directory = self.run_dir(run)
        result = fit(self.config.train.spec_for(run), self.training_set)
        save_params(result.params, directory / PARAMS_NAME)

        predictions = {}
        for tag, dataset in self.eval_sets.items():
            name = prediction_file_name(tag)
            write_prediction_file(predict(result.params, dataset, run), directory / name)
            predictions[tag] = name

        manifest = RunManifest(
            **run.model_dump(),
            predictions=predictions,
            params=PARAMS_NAME,
            fingerprint=self.fingerprint(run),
            epoch_losses=result.epoch_losses,
        )
        write_manifest(manifest, directory / MANIFEST_NAME)
        logger.info(
            f"Trained run {run.run_id} ({run.describe()}): "
            f"final loss {result.epoch_losses[-1]:.4f}"
        )
        return manifest

    async def train_grid(self) -> list[RunManifest]:
        self.prepare_data()
        logger.info(f"Training {len(self.runs)} runs with {self.jobs} concurrent jobs")
        return await self._map_runs(self.train_run)

    def export_datasets(self) -> list[Path]:
        """Write the training set and every evaluation set under <out>/data."""
        data_dir = self.output_dir / "data"
        datasets = {"train": self.training_set, **self.eval_sets}
        paths = [
            export_dataset(dataset, data_dir / f"{tag}.jsonl")
            for tag, dataset in datasets.items()
        ]
        logger.info(f"Exported {len(paths)} datasets to {data_dir}")
        return paths

    def export_attack_run(self, run: RunConfig) -> list[Path]:
        params = self.load_artifacts(run, with_model=True).model()
        paths = []
        for metric in self.config.metrics:
            if metric.kind != MetricKind.PGD:
                continue
            attacked = attack_dataset(
                params, self.eval_sets[metric.eval_set], metric.attack, run
            )
            path = self.run_dir(run) / prediction_file_name(f"attack-{metric.metric_id}")
            paths.append(write_prediction_file(attacked, path))
        return paths

    async def export_attacks(self) -> list[Path]:
        """Adversarial predictions of every PGD metric, next to each run's own."""
        self.prepare_data()
        per_run = await self._map_runs(self.export_attack_run)
        paths = [path for run_paths in per_run for path in run_paths]
        logger.info(f"Exported {len(paths)} adversarial prediction files")
        return paths

    # evaluation

    def load_artifacts(self, run: RunConfig, with_model: bool) -> RunArtifacts:
        directory = self.run_dir(run)
        manifest_path = directory / MANIFEST_NAME
        if not manifest_path.exists():
            raise MissingArtifactError(
                f"run {run.run_id} ({run.describe()}) has not been trained: "
                f"{manifest_path} not found"
            )
        manifest = read_manifest(manifest_path)
        predictions = {
            tag: read_prediction_file(directory / name, run=run, eval_set=tag)
            for tag, name in manifest.predictions.items()
        }

        params = None
        if with_model:
            params_path = directory / manifest.params
            if not params_path.exists():
                raise MissingArtifactError(
                    f"model required: run {run.run_id} ({run.describe()}) "
                    f"has no parameter file {params_path}"
                )
            params = load_params(params_path)
        return RunArtifacts(
            run=run, predictions=predictions, params=params, datasets=self.eval_sets
        )

    def evaluate_run(self, run: RunConfig) -> list[ScoreRecord]:
        with_model = any(metric.needs_model for metric in self.config.metrics)
        artifacts = self.load_artifacts(run, with_model)
        return [evaluate_metric(metric, artifacts) for metric in self.config.metrics]

    async def evaluate(self) -> list[ScoreRecord]:
        self.prepare_data()
        per_run = await self._map_runs(self.evaluate_run)
        scores = [score for run_scores in per_run for score in run_scores]
        write_score_file(scores, self.scores_path)
        logger.info(f"Wrote {len(scores)} scores to {self.scores_path}")
        return scores

    def read_scores(self, path: Path | None = None) -> list[ScoreRecord]:
        return read_score_file(path or self.scores_path)

    # sheets, selection, reports

    def build_sheets(
        self, scores: list[ScoreRecord], metric_ids: list[str] | None = None
    ) -> list[MultiplicitySheet]:
        metric_ids = metric_ids or [metric.metric_id for metric in self.config.metrics]
        for metric_id in metric_ids:
            self.config.metric(metric_id)
        return [build_sheet(scores, self.config.grid, metric_id) for metric_id in metric_ids]

    def write_sheet(
        self,
        sheet: MultiplicitySheet,
        formats: list[SheetFormat],
        palette: HeatmapConfig | None = None,
    ) -> list[Path]:
        return write_sheet(sheet, formats, self.output_dir, palette)

    def select(self, scores: list[ScoreRecord], k_values: list[float] | None = None):
        """One SelectionReport and its written files per k."""
        section = self.config.selection
        if section is None:
            raise ValueError("config has no [selection] section")

        outcomes: list[tuple[SelectionReport, list[Path]]] = []
        for k in k_values or section.k_values:
            spec = SelectionSpec(criteria=section.criteria, k=k)
            selected = intersect_selection(spec, scores)
            report = unforeseen_report(selected, scores, section.unforeseen, spec)

            stem = f"selection-k{k:g}"
            reports = self.output_dir / "reports"
            paths = [
                atomic_write_text(reports / f"{stem}.txt", render_report_text(report)),
                atomic_write_text(reports / f"{stem}.csv", render_report_csv(report)),
            ]
            outcomes.append((report, paths))
        return outcomes

    def overview(self, scores: list[ScoreRecord]) -> list[OverviewRow]:
        rows = []
        for metric in self.config.metrics:
            dist = distribution(scores, metric.metric_id)
            if dist.count == 0:
                logger.warning(f"No scores for {metric.metric_id}; left out of the overview")
                continue
            try:
                delta_all = build_sheet(scores, self.config.grid, metric.metric_id).delta_max_all
            except ValueError as e:
                logger.warning(f"Incomplete grid for {metric.metric_id}: {e}")
                delta_all = None
            rows.append(
                OverviewRow(
                    metric_id=metric.metric_id,
                    count=dist.count,
                    min=dist.min,
                    max=dist.max,
                    mean=dist.mean,
                    delta_max_all=delta_all,
                )
            )
        return rows

    def in_dist_mismatch(self) -> MismatchSummary | None:
        prediction_sets = []
        for run in self.runs:
            path = self.run_dir(run) / prediction_file_name(IN_DIST)
            if path.exists():
                prediction_sets.append(read_prediction_file(path, run=run))
        if len(prediction_sets) < 2:
            return None
        return mismatch_summary(prediction_sets)

    def write_report(self, scores: list[ScoreRecord]) -> list[Path]:
        rows = self.overview(scores)
        mismatch = self.in_dist_mismatch()

        def fmt(value: float | None) -> str:
            return "NA" if value is None else round_half_away(value)

        text = [f"{'metric':<24}{'delta_max_all':>14}{'min':>10}{'max':>10}{'mean':>10}{'count':>8}"]
        csv_lines = ["metric,delta_max_all,min,max,mean,count"]
        for row in rows:
            text.append(
                f"{row.metric_id:<24}{fmt(row.delta_max_all):>14}{fmt(row.min):>10}"
                f"{fmt(row.max):>10}{fmt(row.mean):>10}{row.count:>8}"
            )
            csv_lines.append(
                ",".join(
                    [
                        row.metric_id,
                        "" if row.delta_max_all is None else repr(row.delta_max_all),
                        repr(row.min),
                        repr(row.max),
                        repr(row.mean),
                        str(row.count),
                    ]
                )
            )
        if mismatch is not None:
            text += [
                "",
                f"Prediction mismatch on {IN_DIST} over {mismatch.pairs} run pairs: "
                f"min {fmt(mismatch.min)}%, max {fmt(mismatch.max)}%, mean {fmt(mismatch.mean)}%",
            ]

        reports = self.output_dir / "reports"
        return [
            atomic_write_text(reports / "overview.txt", "\n".join(text) + "\n"),
            atomic_write_text(reports / "overview.csv", "\n".join(csv_lines) + "\n"),
        ]
