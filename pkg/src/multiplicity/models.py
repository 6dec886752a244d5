import hashlib
import math
from enum import StrEnum
from typing import Literal, Self

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

AxisName = Literal[
    "learning_rate", "batch_size", "augmentation", "optimizer", "architecture"
]

AXIS_NAMES: tuple[AxisName, ...] = (
    "learning_rate",
    "batch_size",
    "augmentation",
    "optimizer",
    "architecture",
)

SEED_LIMIT = 2**64


class Optimizer(StrEnum):
    SGD = "sgd"
    ADAM = "adam"


class RunConfig(BaseModel):
    """One trained run: a point in hyperparameter x seed space."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    learning_rate: float = Field(default=0.1, gt=0, description="Optimizer step size")
    batch_size: int = Field(default=128, ge=1, description="Mini-batch size")
    augmentation: str = Field(
        default="jitter-a", min_length=1, description="Augmentation tag"
    )
    optimizer: Optimizer = Field(default=Optimizer.SGD, description="Optimizer")
    architecture: str = Field(
        default="mlp-small", min_length=1, description="Architecture tag"
    )
    seed: int = Field(
        default=0, ge=0, lt=SEED_LIMIT, description="Seed for all run randomness"
    )

    @field_validator("learning_rate")
    @classmethod
    def _finite_learning_rate(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("learning_rate must be finite")
        return value

    def sort_key(self) -> tuple:
        """Total order used whenever runs must be ranked deterministically."""
        return (
            self.learning_rate,
            self.batch_size,
            self.augmentation,
            self.optimizer.value,
            self.architecture,
            self.seed,
        )

    @property
    def run_id(self) -> str:
        canonical = self.model_dump_json()
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def with_value(self, axis: str, value: object) -> "RunConfig":
        # model_copy(update=...) skips validation, so rebuild instead
        return RunConfig.model_validate({**self.model_dump(), axis: value})

    def describe(self) -> str:
        return (
            f"learning_rate={self.learning_rate}; batch_size={self.batch_size}; "
            f"augmentation={self.augmentation}; optimizer={self.optimizer.value}; "
            f"architecture={self.architecture}; seed={self.seed}"
        )


class GridAxis(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: AxisName = Field(description="Hyperparameter varied by this table")
    values: list[float | int | str] = Field(
        min_length=1, description="Choices for the axis, default included"
    )


class GridSpec(BaseModel):
    """One-factor-at-a-time grid around a shared default configuration."""

    model_config = ConfigDict(frozen=True)

    default: RunConfig = Field(
        default_factory=RunConfig, description="Default config (seed ignored)"
    )
    axes: list[GridAxis] = Field(default_factory=list)
    seeds: list[int] = Field(min_length=1, description="Seeds, in table row order")

    @field_validator("seeds")
    @classmethod
    def _valid_seeds(cls, seeds: list[int]) -> list[int]:
        for seed in seeds:
            if not 0 <= seed < SEED_LIMIT:
                raise ValueError(f"seed {seed} outside the unsigned 64-bit range")
        if len(set(seeds)) != len(seeds):
            raise ValueError("seeds must be unique")
        return seeds

    @model_validator(mode="after")
    def _axes_share_default(self) -> Self:
        names = [axis.name for axis in self.axes]
        if len(set(names)) != len(names):
            raise ValueError(f"axis names must be unique, got {names}")
        default = self.seedless_default
        for axis in self.axes:
            choices = [default.with_value(axis.name, v) for v in axis.values]
            if default not in choices:
                raise ValueError(
                    f"axis {axis.name} does not contain the default value "
                    f"{getattr(self.default, axis.name)!r}"
                )
        return self

    @property
    def seedless_default(self) -> RunConfig:
        return self.default.with_value("seed", 0)

    def axis(self, name: str) -> GridAxis:
        for axis in self.axes:
            if axis.name == name:
                return axis
        raise ValueError(f"grid has no axis named {name}")

    def variants(self, name: str) -> list[RunConfig]:
        """Seedless configs of one table, default first, duplicates removed."""
        default = self.seedless_default
        variants = [default]
        for value in self.axis(name).values:
            variant = default.with_value(name, value)
            if variant not in variants:
                variants.append(variant)
        return variants

    def choices(self, name: str) -> list[object]:
        return [getattr(variant, name) for variant in self.variants(name)]

    def with_seeds(self, seeds: list[int]) -> "GridSpec":
        return GridSpec.model_validate({**self.model_dump(), "seeds": seeds})


class PredictionRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    sample_id: str = Field(description="Identifier unique within an eval set")
    logits: list[float] = Field(min_length=1, description="One logit per class")
    label: int = Field(ge=0, description="True class index")
    groups: dict[str, str] = Field(
        default_factory=dict, description="Group attributes of the sample"
    )

    @field_validator("logits")
    @classmethod
    def _finite_logits(cls, logits: list[float]) -> list[float]:
        if not all(math.isfinite(v) for v in logits):
            raise ValueError("logits must be finite")
        return logits

    @model_validator(mode="after")
    def _label_in_range(self) -> Self:
        if self.label >= len(self.logits):
            raise ValueError(
                f"label {self.label} out of range for {len(self.logits)} classes"
            )
        return self


class PredictionSet(BaseModel):
    """Model outputs of one run on one evaluation set."""

    model_config = ConfigDict(frozen=True)

    run: RunConfig | None = Field(
        default=None, description="Run that produced the predictions, if known"
    )
    eval_set: str = Field(default="in-dist", description="Evaluation set tag")
    records: list[PredictionRecord] = Field(default_factory=list)

    @model_validator(mode="after")
    def _consistent_records(self) -> Self:
        seen: set[str] = set()
        class_count = None
        for index, record in enumerate(self.records):
            if class_count is None:
                class_count = len(record.logits)
            elif len(record.logits) != class_count:
                raise ValueError(
                    f"record {index} has {len(record.logits)} logits, "
                    f"expected {class_count}"
                )
            if record.sample_id in seen:
                raise ValueError(f"duplicate sample_id {record.sample_id!r}")
            seen.add(record.sample_id)
        return self

    @property
    def num_classes(self) -> int:
        return len(self.records[0].logits) if self.records else 0


class ScoreRecord(BaseModel):
    """One cell of a multiplicity sheet, as a percentage."""

    model_config = ConfigDict(frozen=True)

    run: RunConfig
    metric_id: str = Field(min_length=1)
    score: float = Field(ge=0.0, le=100.0, allow_inf_nan=False)


class RunManifest(RunConfig):
    """Completed run on disk; written last so its presence marks completion."""

    predictions: dict[str, str] = Field(
        default_factory=dict, description="eval_set tag -> prediction file name"
    )
    params: str = Field(default="params.txt", description="Parameter file name")
    fingerprint: str = Field(
        default="", description="Hash of the settings that produced the run"
    )
    epoch_losses: list[float] = Field(
        default_factory=list, description="Mean training loss per epoch"
    )

    @property
    def run(self) -> RunConfig:
        return RunConfig.model_validate(
            self.model_dump(exclude={"predictions", "params", "fingerprint", "epoch_losses"})
        )
