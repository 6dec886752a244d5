"""
Synthetic skewed datasets.

Classes are Gaussian blobs in [0, 1]^d. The first half of the classes has
style A as its majority style, the second half style B; a sample drawn with
its class's minority style is displaced by `style_offset`.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from multiplicity.integration.files import atomic_write_text
from multiplicity.models import SEED_LIMIT

logger = logging.getLogger(__name__)


class CategoricalSampler(BaseModel):
    model_config = ConfigDict(frozen=True)

    categories: list[str] = Field(min_length=1)
    probabilities: list[float] = Field(min_length=1)

    @model_validator(mode="after")
    def _valid_distribution(self) -> Self:
        if len(self.categories) != len(self.probabilities):
            raise ValueError("categories and probabilities must have equal length")
        if any(p < 0 for p in self.probabilities):
            raise ValueError("probabilities must be nonnegative")
        if abs(sum(self.probabilities) - 1.0) > 1e-9:
            raise ValueError("probabilities must sum to 1")
        return self


class DatasetSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    num_classes: int = Field(ge=2)
    input_dim: int = Field(ge=1)
    samples_per_class: int = Field(ge=1)
    class_means: list[list[float]]
    cluster_stddev: float = Field(gt=0)
    skew_attribute: str = Field(default="style", min_length=1)
    skew_ratio: float = Field(
        default=0.95, gt=0.5, le=1.0, description="Majority-style fraction per class"
    )
    style_values: tuple[str, str] = Field(
        default=("color", "gray"), description="Style A and style B labels"
    )
    style_offset: list[float]
    extra_attributes: dict[str, CategoricalSampler] = Field(default_factory=dict)
    seed: int = Field(default=0, ge=0, lt=SEED_LIMIT)

    @field_validator("style_values")
    @classmethod
    def _distinct_styles(cls, styles: tuple[str, str]) -> tuple[str, str]:
        if styles[0] == styles[1]:
            raise ValueError("style_values must be distinct")
        return styles

    @model_validator(mode="after")
    def _shapes(self) -> Self:
        if len(self.class_means) != self.num_classes:
            raise ValueError(
                f"class_means has {len(self.class_means)} entries, "
                f"expected {self.num_classes}"
            )
        for index, mean in enumerate(self.class_means):
            if len(mean) != self.input_dim:
                raise ValueError(f"class_means[{index}] must have length {self.input_dim}")
        if len(self.style_offset) != self.input_dim:
            raise ValueError(f"style_offset must have length {self.input_dim}")
        reserved = {self.skew_attribute, "skew_group", "class_group"}
        clash = reserved & set(self.extra_attributes)
        if clash:
            raise ValueError(f"extra_attributes may not redefine {sorted(clash)}")
        return self

    def majority_style(self, label: int) -> str:
        return self.style_values[0] if label < self.num_classes // 2 else self.style_values[1]


@dataclass(frozen=True)
class LabeledDataset:
    inputs: np.ndarray
    labels: np.ndarray
    groups: list[dict[str, str]]
    sample_ids: list[str]
    eval_set: str = "in-dist"
    num_classes: int = field(default=0)

    def __len__(self) -> int:
        return len(self.labels)


def generate_skewed(spec: DatasetSpec, eval_set: str = "in-dist") -> LabeledDataset:
    """Draw `samples_per_class` samples per class; a pure function of `spec`."""
    means = np.asarray(spec.class_means, dtype=float)
    return _generate(spec, means, spec.cluster_stddev, eval_set)


def generate_shifted(
    spec: DatasetSpec,
    shift: list[float] | np.ndarray,
    stddev_scale: float,
    eval_set: str = "ood",
) -> LabeledDataset:
    """Same draws as generate_skewed with every class mean moved by `shift`."""
    shift = np.asarray(shift, dtype=float)
    if shift.shape != (spec.input_dim,):
        raise ValueError(
            f"shift has shape {shift.shape}, expected ({spec.input_dim},)"
        )
    if not stddev_scale > 0:
        raise ValueError("stddev_scale must be positive")

    means = np.asarray(spec.class_means, dtype=float) + shift
    return _generate(spec, means, spec.cluster_stddev * stddev_scale, eval_set)


def _generate(
    spec: DatasetSpec, means: np.ndarray, stddev: float, eval_set: str
) -> LabeledDataset:
    rng = np.random.default_rng(spec.seed)
    offset = np.asarray(spec.style_offset, dtype=float)
    style_a, style_b = spec.style_values
    n = spec.samples_per_class

    inputs, labels, groups = [], [], []
    for label in range(spec.num_classes):
        majority = spec.majority_style(label)
        minority = style_b if majority == style_a else style_a

        is_majority = rng.random(n) < spec.skew_ratio
        noise = rng.normal(0.0, 1.0, size=(n, spec.input_dim))
        extras = {
            name: rng.choice(len(sampler.categories), size=n, p=sampler.probabilities)
            for name, sampler in spec.extra_attributes.items()
        }

        points = means[label] + stddev * noise
        points[~is_majority] += offset
        inputs.append(np.clip(points, 0.0, 1.0))
        labels.append(np.full(n, label, dtype=np.int64))

        for i in range(n):
            sample_groups = {
                spec.skew_attribute: majority if is_majority[i] else minority,
                "skew_group": "majority" if is_majority[i] else "minority",
                "class_group": f"{majority}-majority",
            }
            for name, sampler in spec.extra_attributes.items():
                sample_groups[name] = sampler.categories[extras[name][i]]
            groups.append(sample_groups)

    total = spec.num_classes * n
    dataset = LabeledDataset(
        inputs=np.concatenate(inputs, axis=0),
        labels=np.concatenate(labels),
        groups=groups,
        sample_ids=[f"{eval_set}/{index:06d}" for index in range(total)],
        eval_set=eval_set,
        num_classes=spec.num_classes,
    )
    logger.debug(f"Generated {total} samples for eval set {eval_set}")
    return dataset


def export_dataset(dataset: LabeledDataset, path: Path) -> Path:
    """Line-delimited records in the prediction-file layout, plus `input`."""
    lines = []
    for index, sample_id in enumerate(dataset.sample_ids):
        lines.append(
            json.dumps(
                {
                    "sample_id": sample_id,
                    "input": dataset.inputs[index].tolist(),
                    "label": int(dataset.labels[index]),
                    "groups": dataset.groups[index],
                },
                ensure_ascii=False,
            )
        )
    return atomic_write_text(Path(path), "".join(line + "\n" for line in lines))
