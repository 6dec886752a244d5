import logging
import math
from dataclasses import dataclass, field
from typing import Literal, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from multiplicity.models import Optimizer, PredictionRecord, PredictionSet, RunConfig
from multiplicity.synthdata import LabeledDataset
from multiplicity.toymodel.mlp import (
    MLPParams,
    forward,
    hidden_widths,
    init_params,
    loss_and_grads,
)

logger = logging.getLogger(__name__)

DEFAULT_JITTER_SCALES = {"jitter-a": 0.02, "jitter-b": 0.05}

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8


class TrainSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    run: RunConfig
    epochs: int = Field(default=50, ge=1, description="Full passes over the data")
    loss: Literal["cross-entropy"] = "cross-entropy"
    jitter_scales: dict[str, float] = Field(
        default_factory=lambda: dict(DEFAULT_JITTER_SCALES),
        description="Uniform input-noise magnitude per augmentation tag",
    )

    @model_validator(mode="after")
    def _known_tags(self) -> Self:
        if any(scale < 0 for scale in self.jitter_scales.values()):
            raise ValueError("jitter scales must be nonnegative")
        if self.run.augmentation not in self.jitter_scales:
            raise ValueError(
                f"Unknown augmentation {self.run.augmentation!r}; "
                f"expected one of {sorted(self.jitter_scales)}"
            )
        hidden_widths(self.run.architecture)
        return self


@dataclass
class TrainingResult:
    params: MLPParams
    epoch_losses: list[float] = field(default_factory=list)


class _Adam:
    def __init__(self, params: MLPParams):
        self.step = 0
        self.first = [np.zeros_like(a) for a in params.arrays()]
        self.second = [np.zeros_like(a) for a in params.arrays()]

    def update(self, params: MLPParams, grads: MLPParams, learning_rate: float) -> None:
        self.step += 1
        correction1 = 1.0 - ADAM_BETA1**self.step
        correction2 = 1.0 - ADAM_BETA2**self.step
        for param, grad, m, v in zip(
            params.arrays(), grads.arrays(), self.first, self.second
        ):
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * grad
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * grad**2
            param -= learning_rate * (m / correction1) / (
                np.sqrt(v / correction2) + ADAM_EPSILON
            )


def _sgd_update(params: MLPParams, grads: MLPParams, learning_rate: float) -> None:
    for param, grad in zip(params.arrays(), grads.arrays()):
        param -= learning_rate * grad


def fit(spec: TrainSpec, data: LabeledDataset) -> TrainingResult:
    """
    Train from scratch with mini-batch SGD or Adam on mean cross-entropy.

    One generator seeded by the run seed is consumed in a fixed order:
    initialization, then per epoch a shuffle followed by one jitter draw per
    batch. The result is a pure function of (spec, data).
    """
    run = spec.run
    inputs = np.asarray(data.inputs, dtype=float)
    labels = np.asarray(data.labels, dtype=np.int64)
    rows = len(labels)
    if rows == 0:
        raise ValueError("cannot train on an empty dataset")

    num_classes = max(data.num_classes, int(labels.max()) + 1)
    rng = np.random.default_rng(run.seed)
    params = init_params(run.architecture, inputs.shape[1], num_classes, rng)

    jitter = spec.jitter_scales[run.augmentation]
    adam = _Adam(params) if run.optimizer == Optimizer.ADAM else None
    batches_per_epoch = math.ceil(rows / run.batch_size)

    epoch_losses = []
    for epoch in range(spec.epochs):
        order = rng.permutation(rows)
        batch_losses = []
        for batch in range(batches_per_epoch):
            index = order[batch * run.batch_size : (batch + 1) * run.batch_size]
            batch_inputs = inputs[index]
            if jitter > 0:
                noise = rng.uniform(-jitter, jitter, size=batch_inputs.shape)
                batch_inputs = np.clip(batch_inputs + noise, 0.0, 1.0)

            loss, grads = loss_and_grads(params, batch_inputs, labels[index])
            if adam is not None:
                adam.update(params, grads, run.learning_rate)
            else:
                _sgd_update(params, grads, run.learning_rate)
            batch_losses.append(loss)

        epoch_losses.append(float(np.mean(batch_losses)))
        logger.debug(f"run {run.run_id} epoch {epoch + 1}: loss {epoch_losses[-1]:.4f}")

    params.validate()
    return TrainingResult(params=params, epoch_losses=epoch_losses)


def train(spec: TrainSpec, data: LabeledDataset) -> MLPParams:
    return fit(spec, data).params


def predict(
    params: MLPParams, data: LabeledDataset, run: RunConfig | None = None
) -> PredictionSet:
    logits = forward(params, data.inputs)
    records = [
        PredictionRecord(
            sample_id=sample_id,
            logits=logits[index].tolist(),
            label=int(data.labels[index]),
            groups=dict(data.groups[index]),
        )
        for index, sample_id in enumerate(data.sample_ids)
    ]
    return PredictionSet(run=run, eval_set=data.eval_set, records=records)
