from pathlib import Path

import numpy as np
import pytest

from multiplicity.models import PredictionRecord, PredictionSet, RunConfig
from multiplicity.synthdata import DatasetSpec, generate_skewed
from multiplicity.toymodel.training import TrainSpec, train

SMALL_PIPELINE_TOML = """
[dataset]
num_classes = 2
input_dim = 2
samples_per_class = 40
class_means = [[0.3, 0.3], [0.7, 0.7]]
cluster_stddev = 0.08
skew_ratio = 0.8
style_offset = [0.1, 0.0]
test_seed = 1

[dataset.extra_attributes.age_band]
categories = ["young", "old"]
probabilities = [0.5, 0.5]

[dataset.shifted.ood-a]
shift = [0.1, 0.1]

[grid]
seeds = [0, 1]

[[grid.axes]]
name = "learning_rate"
values = [0.1, 0.05]

[train]
epochs = 3

[[metrics]]
metric_id = "accuracy"
kind = "plain"

[[metrics]]
metric_id = "minority"
kind = "group"
group_filter = [["skew_group", "minority"]]

[[metrics]]
metric_id = "ood-a"
kind = "ood"
eval_set = "ood-a"

[[metrics]]
metric_id = "output-noise"
kind = "output_noise"
noise = { lam = 1.0, repetitions = 10 }

[[metrics]]
metric_id = "input-noise"
kind = "input_noise"
noise = { lam = 0.1, repetitions = 5 }

[[metrics]]
metric_id = "pgd"
kind = "pgd"
attack = { delta = 0.01, steps = 3 }

[selection]
criteria = ["accuracy", "ood-a"]
unforeseen = ["minority", "pgd"]
k_values = [50, 100]
"""


@pytest.fixture
def small_config_path(tmp_path: Path) -> Path:
    path = tmp_path / "pipeline.toml"
    path.write_text(SMALL_PIPELINE_TOML, encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def toy_spec() -> DatasetSpec:
    return DatasetSpec(
        num_classes=4,
        input_dim=2,
        samples_per_class=100,
        class_means=[[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]],
        cluster_stddev=0.08,
        style_offset=[0.1, 0.0],
        seed=0,
    )


@pytest.fixture(scope="session")
def toy_data(toy_spec):
    return generate_skewed(toy_spec)


@pytest.fixture(scope="session")
def toy_params(toy_data):
    run = RunConfig(learning_rate=0.05, batch_size=32, optimizer="adam", seed=0)
    return train(TrainSpec(run=run, epochs=30), toy_data)


def make_predictions(
    rows: list[tuple[list[float], int]],
    groups: list[dict[str, str]] | None = None,
    eval_set: str = "in-dist",
) -> PredictionSet:
    groups = groups or [{} for _ in rows]
    return PredictionSet(
        eval_set=eval_set,
        records=[
            PredictionRecord(sample_id=f"s{i}", logits=logits, label=label, groups=group)
            for i, ((logits, label), group) in enumerate(zip(rows, groups))
        ],
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def predictions():
    """Factory: rows of (logits, label) -> PredictionSet with ids s0, s1, ..."""
    return make_predictions
