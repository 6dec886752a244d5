import logging
import tomllib
from pathlib import Path
from typing import Self

from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic_settings import TomlConfigSettingsSource

from multiplicity.core.config import Settings
from multiplicity.grid import expand_grid
from multiplicity.metrics import IN_DIST, MetricSpec
from multiplicity.models import SEED_LIMIT, GridSpec, RunConfig
from multiplicity.selection import SelectionSpec
from multiplicity.synthdata import DatasetSpec
from multiplicity.toymodel.mlp import hidden_widths
from multiplicity.toymodel.training import DEFAULT_JITTER_SCALES, TrainSpec

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """The pipeline config file is missing or unreadable."""


class ShiftSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    shift: list[float] = Field(description="Added to every class mean")
    stddev_scale: float = Field(default=1.0, gt=0, description="Cluster spread multiplier")
    seed: int | None = Field(
        default=None, ge=0, lt=SEED_LIMIT, description="Defaults to the dataset test_seed"
    )
    samples_per_class: int | None = Field(default=None, ge=1)


class DatasetSection(DatasetSpec):
    """Training-set spec plus the seeds and shifts of the evaluation sets."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    test_seed: int = Field(
        default=1, ge=0, lt=SEED_LIMIT, description="Seed of the in-dist evaluation set"
    )
    shifted: dict[str, ShiftSpec] = Field(
        default_factory=dict, description="Shifted evaluation sets keyed by eval_set tag"
    )

    @model_validator(mode="after")
    def _shift_shapes(self) -> Self:
        if IN_DIST in self.shifted:
            raise ValueError(f"{IN_DIST!r} is reserved for the unshifted evaluation set")
        for tag, shift in self.shifted.items():
            if len(shift.shift) != self.input_dim:
                raise ValueError(f"shifted.{tag}.shift must have length {self.input_dim}")
        return self

    def base_spec(self, **update: object) -> DatasetSpec:
        fields = self.model_dump(exclude={"test_seed", "shifted"})
        return DatasetSpec.model_validate({**fields, **update})

    @property
    def eval_sets(self) -> list[str]:
        return [IN_DIST, *self.shifted]


class TrainSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    epochs: int = Field(default=50, ge=1, description="Full passes over the training set")
    jitter_scales: dict[str, float] = Field(
        default_factory=lambda: dict(DEFAULT_JITTER_SCALES),
        description="Uniform input-noise magnitude per augmentation tag",
    )

    def spec_for(self, run: RunConfig) -> TrainSpec:
        return TrainSpec(run=run, epochs=self.epochs, jitter_scales=self.jitter_scales)


class SelectionSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    criteria: list[str] = Field(min_length=1, description="Metric ids used for selection")
    k_values: list[float] = Field(
        default_factory=lambda: [75.0, 50.0], min_length=1, description="Top-k% levels"
    )
    unforeseen: list[str] = Field(
        default_factory=list, description="Metric ids reported before and after selection"
    )

    def specs(self) -> list[SelectionSpec]:
        return [SelectionSpec(criteria=self.criteria, k=k) for k in self.k_values]


class PipelineConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    dataset: DatasetSection
    grid: GridSpec
    train: TrainSection = Field(default_factory=TrainSection)
    metrics: list[MetricSpec] = Field(min_length=1)
    selection: SelectionSection | None = None
    output_dir: Path | None = Field(
        default=None, description="Overrides the MULTIPLICITY_OUTPUT_DIR setting"
    )

    @model_validator(mode="after")
    def _references(self) -> Self:
        ids = [metric.metric_id for metric in self.metrics]
        duplicates = sorted({i for i in ids if ids.count(i) > 1})
        if duplicates:
            raise ValueError(f"metric ids must be unique, duplicated: {duplicates}")

        for metric in self.metrics:
            if metric.eval_set not in self.dataset.eval_sets:
                raise ValueError(
                    f"metric {metric.metric_id} uses unknown eval_set {metric.eval_set!r}; "
                    f"available: {self.dataset.eval_sets}"
                )

        if self.selection is not None:
            for metric_id in [*self.selection.criteria, *self.selection.unforeseen]:
                if metric_id not in ids:
                    raise ValueError(f"selection refers to unknown metric {metric_id!r}")

        for run in expand_grid(self.grid):
            hidden_widths(run.architecture)
            if run.augmentation not in self.train.jitter_scales:
                raise ValueError(
                    f"augmentation {run.augmentation!r} has no jitter scale; "
                    f"known: {sorted(self.train.jitter_scales)}"
                )
        return self

    def metric(self, metric_id: str) -> MetricSpec:
        for metric in self.metrics:
            if metric.metric_id == metric_id:
                return metric
        raise ValueError(
            f"Unknown metric {metric_id!r}; available: {[m.metric_id for m in self.metrics]}"
        )


def load_pipeline_config(path: Path, seed_override: list[int] | None = None) -> PipelineConfig:
    """
    Read a TOML pipeline config.

    Raises:
        ConfigError: If the file is missing or is not valid TOML
        ValidationError: If a section violates its schema
    """
    path = Path(path)
    # the TOML source silently yields {} for a missing file
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    try:
        data = TomlConfigSettingsSource(Settings, toml_file=path).toml_data
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Invalid TOML in {path}: {e}") from e

    if seed_override:
        grid = dict(data.get("grid", {}))
        grid["seeds"] = list(seed_override)
        data = {**data, "grid": grid}

    config = PipelineConfig.model_validate(data)
    logger.info(
        f"Loaded {path}: {len(expand_grid(config.grid))} runs, {len(config.metrics)} metrics"
    )
    return config
