"""
Model-dependent interventions: L-infinity PGD and input-feature noise.
"""

import logging
from collections.abc import Callable
from enum import StrEnum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from multiplicity.models import SEED_LIMIT, PredictionRecord, PredictionSet, RunConfig
from multiplicity.seeding import sample_rng, signed_exponential
from multiplicity.synthdata import LabeledDataset
from multiplicity.toymodel.mlp import MLPParams, forward, input_gradient, predict_labels

logger = logging.getLogger(__name__)

# keeps the (samples, repetitions, features) noise tensor bounded
NOISE_CHUNK_ROWS = 200_000


class NoiseTarget(StrEnum):
    OUTPUT_LOGITS = "output_logits"
    INPUT_FEATURES = "input_features"


class AttackSpec(BaseModel):
    """Untargeted PGD on the cross-entropy of the true label."""

    model_config = ConfigDict(frozen=True)

    delta: float = Field(ge=0.0, allow_inf_nan=False, description="L-infinity budget")
    steps: int = Field(default=10, ge=1, description="Gradient-sign iterations")
    step_size: float | None = Field(
        default=None, gt=0.0, allow_inf_nan=False, description="Defaults to delta / 4"
    )
    random_start: bool = Field(
        default=False, description="Start from a uniform point in the delta-ball"
    )
    seed: int = Field(default=0, ge=0, lt=SEED_LIMIT)

    @property
    def effective_step_size(self) -> float:
        return self.step_size if self.step_size is not None else self.delta / 4

    @property
    def eval_set(self) -> str:
        return f"pgd-δ={self.delta:g}"


class NoiseSpec(BaseModel):
    """
    Signed exponential noise: magnitude ~ Exp(mean=lam), independent random sign,
    so each perturbation is Laplace(0, lam).
    """

    model_config = ConfigDict(frozen=True)

    lam: float = Field(ge=0.0, allow_inf_nan=False, description="Noise scale")
    repetitions: int = Field(default=100, ge=1, description="Monte Carlo repetitions")
    seed: int = Field(default=0, ge=0, lt=SEED_LIMIT)
    target: NoiseTarget = NoiseTarget.OUTPUT_LOGITS


def _check_domain(inputs: np.ndarray) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2:
        raise ValueError(f"expected a 2-D input batch, got shape {inputs.shape}")
    if not np.all(np.isfinite(inputs)) or np.any(inputs < 0.0) or np.any(inputs > 1.0):
        raise ValueError("inputs must lie in [0, 1]")
    return inputs


def _project(candidate: np.ndarray, origin: np.ndarray, delta: float) -> np.ndarray:
    # ball first, box last: origin is inside the box, so the result stays in both
    candidate = np.clip(candidate, origin - delta, origin + delta)
    return np.clip(candidate, 0.0, 1.0)


def pgd_attack_batch(
    params: MLPParams,
    inputs: np.ndarray,
    labels: np.ndarray,
    spec: AttackSpec,
    sample_ids: list[str] | None = None,
) -> np.ndarray:
    """
    Attack every row independently; row i equals pgd_attack on sample i.

    The optional random start draws from a generator keyed by
    (spec.seed, sample_id), so results do not depend on row order.
    """
    origin = _check_domain(inputs)
    labels = np.asarray(labels, dtype=np.int64)
    if spec.delta == 0:
        return origin.copy()

    if spec.random_start:
        if sample_ids is None:
            sample_ids = [str(index) for index in range(len(origin))]
        if len(sample_ids) != len(origin):
            raise ValueError("sample_ids must match the number of input rows")
        start = np.stack(
            [
                sample_rng(spec.seed, sample_id).uniform(
                    -spec.delta, spec.delta, size=origin.shape[1]
                )
                for sample_id in sample_ids
            ]
        )
        adversarial = _project(origin + start, origin, spec.delta)
    else:
        adversarial = origin.copy()

    step_size = spec.effective_step_size
    for _ in range(spec.steps):
        gradient = input_gradient(params, adversarial, labels)
        adversarial = _project(
            adversarial + step_size * np.sign(gradient), origin, spec.delta
        )
    return adversarial


def pgd_attack(
    params: MLPParams,
    input: np.ndarray,
    label: int,
    spec: AttackSpec,
    sample_id: str = "0",
) -> np.ndarray:
    row = np.asarray(input, dtype=float).reshape(1, -1)
    return pgd_attack_batch(params, row, np.array([label]), spec, [sample_id])[0]


def _canonical_order(data: LabeledDataset) -> np.ndarray:
    """Sort by sample id so batch composition is independent of record order."""
    return np.array(
        sorted(range(len(data.sample_ids)), key=data.sample_ids.__getitem__),
        dtype=np.int64,
    )


def _accuracy(predicted: np.ndarray, labels: np.ndarray) -> float:
    if len(labels) == 0:
        raise ValueError("cannot score an empty dataset")
    return 100.0 * float(np.mean(predicted == labels))


def pgd_accuracy(params: MLPParams, data: LabeledDataset, spec: AttackSpec) -> float:
    if spec.delta == 0:
        # same forward call as predict(), so the zero-budget score is plain accuracy
        return _accuracy(predict_labels(params, _check_domain(data.inputs)), data.labels)

    order = _canonical_order(data)
    inputs, labels = data.inputs[order], data.labels[order]
    sample_ids = [data.sample_ids[i] for i in order]

    adversarial = pgd_attack_batch(params, inputs, labels, spec, sample_ids)
    score = _accuracy(predict_labels(params, adversarial), labels)
    logger.debug(f"PGD accuracy at delta={spec.delta}: {score:.4f}")
    return score


def attack_dataset(
    params: MLPParams,
    data: LabeledDataset,
    spec: AttackSpec,
    run: RunConfig | None = None,
) -> PredictionSet:
    """Predictions on the adversarial inputs, tagged `pgd-δ=<delta>`."""
    order = _canonical_order(data)
    sample_ids = [data.sample_ids[i] for i in order]
    adversarial = pgd_attack_batch(
        params, data.inputs[order], data.labels[order], spec, sample_ids
    )
    logits = forward(params, adversarial)

    # restore the dataset's own record order
    position = {index: row for row, index in enumerate(order)}
    records = [
        PredictionRecord(
            sample_id=sample_id,
            logits=logits[position[index]].tolist(),
            label=int(data.labels[index]),
            groups=dict(data.groups[index]),
        )
        for index, sample_id in enumerate(data.sample_ids)
    ]
    return PredictionSet(run=run, eval_set=spec.eval_set, records=records)


def noise_draws(
    seed: int, sample_id: str, repetitions: int, width: int, target: NoiseTarget
) -> np.ndarray:
    """
    Unit-scale signed exponential draws of shape (repetitions, width) for one
    sample. Row r is the r-th repetition whatever `repetitions` is. Scaling by
    lam happens at the call site, so every lam reuses the same randomness.
    """
    target_index = 0 if target == NoiseTarget.OUTPUT_LOGITS else 1
    rng = sample_rng(seed, sample_id, target_index)
    return signed_exponential(rng, 1.0, (repetitions, width))


def repeated_noise_accuracy(
    values: np.ndarray,
    labels: np.ndarray,
    sample_ids: list[str],
    spec: NoiseSpec,
    classify: Callable[[np.ndarray], np.ndarray],
) -> float:
    """
    Mean accuracy over `spec.repetitions` noisy copies of every row of `values`.

    `classify` maps a (rows, repetitions, width) array of perturbed values to
    (rows, repetitions) predicted labels.
    """
    if len(labels) == 0:
        raise ValueError("cannot score an empty dataset")
    repetitions, width = spec.repetitions, values.shape[1]
    per_chunk = max(1, NOISE_CHUNK_ROWS // repetitions)

    correct = 0
    for start in range(0, len(labels), per_chunk):
        stop = min(start + per_chunk, len(labels))
        noise = np.stack(
            [
                noise_draws(spec.seed, sample_ids[i], repetitions, width, spec.target)
                for i in range(start, stop)
            ]
        )
        predicted = classify(values[start:stop, None, :] + spec.lam * noise)
        correct += int(np.sum(predicted == labels[start:stop, None]))

    return 100.0 * correct / (len(labels) * repetitions)


def input_perturbation_accuracy(
    params: MLPParams, data: LabeledDataset, spec: NoiseSpec
) -> float:
    """
    Mean accuracy over `repetitions` noisy copies of the inputs, each
    coordinate perturbed independently and clamped back to [0, 1].
    """
    if spec.target != NoiseTarget.INPUT_FEATURES:
        raise ValueError(f"expected an input_features noise spec, got {spec.target}")
    if spec.lam == 0:
        return _accuracy(predict_labels(params, _check_domain(data.inputs)), data.labels)

    order = _canonical_order(data)
    inputs = _check_domain(data.inputs[order])
    sample_ids = [data.sample_ids[i] for i in order]

    def classify(noisy: np.ndarray) -> np.ndarray:
        rows, repetitions, width = noisy.shape
        flat = np.clip(noisy, 0.0, 1.0).reshape(-1, width)
        return predict_labels(params, flat).reshape(rows, repetitions)

    score = repeated_noise_accuracy(inputs, data.labels[order], sample_ids, spec, classify)
    logger.debug(f"Input perturbation accuracy at lam={spec.lam}: {score:.4f}")
    return score
