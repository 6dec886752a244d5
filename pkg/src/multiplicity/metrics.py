"""
Trustworthiness metrics expressed as accuracy under an intervention.

Model-free kinds (plain, group, ood, output_noise) read a PredictionSet;
model-dependent kinds (input_noise, pgd) also need the trained parameters
and the evaluation inputs.
"""

import itertools
import logging
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from multiplicity.attacks import (
    AttackSpec,
    NoiseSpec,
    NoiseTarget,
    input_perturbation_accuracy,
    pgd_accuracy,
    repeated_noise_accuracy,
)
from multiplicity.models import PredictionSet, RunConfig, ScoreRecord
from multiplicity.synthdata import LabeledDataset
from multiplicity.toymodel.mlp import MLPParams

logger = logging.getLogger(__name__)

IN_DIST = "in-dist"


class MetricKind(StrEnum):
    PLAIN = "plain"
    GROUP = "group"
    OOD = "ood"
    OUTPUT_NOISE = "output_noise"
    INPUT_NOISE = "input_noise"
    PGD = "pgd"


_NOISE_TARGETS = {
    MetricKind.OUTPUT_NOISE: NoiseTarget.OUTPUT_LOGITS,
    MetricKind.INPUT_NOISE: NoiseTarget.INPUT_FEATURES,
}


class EmptyGroupError(ValueError):
    """No record matches a group filter; distinct from a score of 0."""


class MissingArtifactError(ValueError):
    """A run lacks the predictions, parameters or dataset a metric needs."""


class MetricSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    metric_id: str = Field(min_length=1, description="Identifier used in score files")
    kind: MetricKind = Field(description="Intervention applied before scoring")
    group_filter: list[tuple[str, str]] | None = Field(
        default=None, description="(attribute, value) pairs, all of which must match"
    )
    eval_set: str = Field(default=IN_DIST, description="Evaluation set to score on")
    noise: NoiseSpec | None = None
    attack: AttackSpec | None = None

    @model_validator(mode="before")
    @classmethod
    def _noise_target_from_kind(cls, data: Any) -> Any:
        if isinstance(data, dict) and isinstance(data.get("noise"), dict):
            target = _NOISE_TARGETS.get(data.get("kind"))
            if target is not None and "target" not in data["noise"]:
                data = {**data, "noise": {**data["noise"], "target": target.value}}
        return data

    @model_validator(mode="after")
    def _required_parts(self) -> Self:
        if self.kind == MetricKind.GROUP and not self.group_filter:
            raise ValueError(f"{self.metric_id}: group metrics need a group_filter")
        if self.kind == MetricKind.OOD and self.eval_set == IN_DIST:
            raise ValueError(f"{self.metric_id}: ood metrics need a shifted eval_set")
        if self.kind in _NOISE_TARGETS:
            if self.noise is None:
                raise ValueError(f"{self.metric_id}: {self.kind} metrics need noise")
            if self.noise.target != _NOISE_TARGETS[self.kind]:
                raise ValueError(
                    f"{self.metric_id}: {self.kind} needs noise target "
                    f"{_NOISE_TARGETS[self.kind]}, got {self.noise.target}"
                )
        if self.kind == MetricKind.PGD and self.attack is None:
            raise ValueError(f"{self.metric_id}: pgd metrics need an attack")
        return self

    @property
    def needs_model(self) -> bool:
        return self.kind in (MetricKind.INPUT_NOISE, MetricKind.PGD)


@dataclass
class RunArtifacts:
    """Everything evaluate_metric may consume for one run."""

    run: RunConfig
    predictions: dict[str, PredictionSet] = field(default_factory=dict)
    params: MLPParams | None = None
    datasets: dict[str, LabeledDataset] = field(default_factory=dict)

    def prediction_set(self, eval_set: str) -> PredictionSet:
        try:
            return self.predictions[eval_set]
        except KeyError:
            raise MissingArtifactError(
                f"run {self.run.run_id} has no predictions for eval set {eval_set!r}; "
                f"available: {sorted(self.predictions)}"
            ) from None

    def model(self) -> MLPParams:
        if self.params is None:
            raise MissingArtifactError(f"model required: run {self.run.run_id} has no params")
        return self.params

    def dataset(self, eval_set: str) -> LabeledDataset:
        try:
            return self.datasets[eval_set]
        except KeyError:
            raise MissingArtifactError(
                f"eval set {eval_set!r} inputs are not available for run {self.run.run_id}"
            ) from None


def _logits_and_labels(preds: PredictionSet) -> tuple[np.ndarray, np.ndarray]:
    if not preds.records:
        raise ValueError(f"prediction set {preds.eval_set!r} is empty")
    logits = np.array([record.logits for record in preds.records], dtype=float)
    labels = np.array([record.label for record in preds.records], dtype=np.int64)
    return logits, labels


def plain_accuracy(preds: PredictionSet) -> float:
    logits, labels = _logits_and_labels(preds)
    # np.argmax picks the lowest class index among ties
    return 100.0 * float(np.mean(np.argmax(logits, axis=1) == labels))


def matches(groups: dict[str, str], group_filter: list[tuple[str, str]]) -> bool:
    return all(groups.get(attribute) == value for attribute, value in group_filter)


def group_accuracy(preds: PredictionSet, group_filter: list[tuple[str, str]]) -> float:
    if not group_filter:
        raise ValueError("group filter must name at least one (attribute, value) pair")
    subset = [record for record in preds.records if matches(record.groups, group_filter)]
    if not subset:
        raise EmptyGroupError(
            f"empty group: no record of {preds.eval_set!r} matches {group_filter}"
        )
    return plain_accuracy(preds.model_copy(update={"records": subset}))


def output_perturbation_accuracy(preds: PredictionSet, noise: NoiseSpec) -> float:
    """Mean accuracy over `repetitions` noisy copies of every record's logits."""
    if noise.target != NoiseTarget.OUTPUT_LOGITS:
        raise ValueError(f"expected an output_logits noise spec, got {noise.target}")
    if noise.lam == 0:
        return plain_accuracy(preds)

    logits, labels = _logits_and_labels(preds)
    sample_ids = [record.sample_id for record in preds.records]
    return repeated_noise_accuracy(
        logits, labels, sample_ids, noise, lambda noisy: np.argmax(noisy, axis=2)
    )


def evaluate_metric(spec: MetricSpec, artifacts: RunArtifacts) -> ScoreRecord:
    match spec.kind:
        case MetricKind.PLAIN | MetricKind.OOD:
            score = plain_accuracy(artifacts.prediction_set(spec.eval_set))
        case MetricKind.GROUP:
            score = group_accuracy(
                artifacts.prediction_set(spec.eval_set), spec.group_filter
            )
        case MetricKind.OUTPUT_NOISE:
            score = output_perturbation_accuracy(
                artifacts.prediction_set(spec.eval_set), spec.noise
            )
        case MetricKind.INPUT_NOISE:
            score = input_perturbation_accuracy(
                artifacts.model(), artifacts.dataset(spec.eval_set), spec.noise
            )
        case MetricKind.PGD:
            score = pgd_accuracy(
                artifacts.model(), artifacts.dataset(spec.eval_set), spec.attack
            )

    logger.debug(f"{spec.metric_id} for run {artifacts.run.run_id}: {score:.4f}")
    return ScoreRecord(run=artifacts.run, metric_id=spec.metric_id, score=score)


class MismatchSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    pairs: int = Field(description="Number of run pairs compared")
    min: float
    max: float
    mean: float


def _predicted_by_id(preds: PredictionSet) -> dict[str, int]:
    logits, _ = _logits_and_labels(preds)
    predicted = np.argmax(logits, axis=1)
    return {
        record.sample_id: int(label)
        for record, label in zip(preds.records, predicted)
    }


def prediction_mismatch(a: PredictionSet, b: PredictionSet) -> float:
    """Percentage of shared samples on which two runs predict different classes."""
    left, right = _predicted_by_id(a), _predicted_by_id(b)
    shared = left.keys() & right.keys()
    if not shared:
        raise ValueError("prediction sets share no sample ids")
    differing = sum(left[sample_id] != right[sample_id] for sample_id in shared)
    return 100.0 * differing / len(shared)


def mismatch_summary(prediction_sets: list[PredictionSet]) -> MismatchSummary:
    """Pairwise prediction_mismatch over every pair of runs."""
    if len(prediction_sets) < 2:
        raise ValueError("mismatch needs at least two prediction sets")

    rates = [
        prediction_mismatch(a, b)
        for a, b in itertools.combinations(prediction_sets, 2)
    ]
    return MismatchSummary(
        pairs=len(rates), min=min(rates), max=max(rates), mean=float(np.mean(rates))
    )
