from pathlib import Path

import pytest
from pydantic import ValidationError

from multiplicity.grid import expand_grid
from multiplicity.services.pipeline.schemas import ConfigError, load_pipeline_config


def edit(path, old: str, new: str):
    text = path.read_text()
    assert old in text
    path.write_text(text.replace(old, new, 1))
    return path


def test_loads_small_config(small_config_path):
    config = load_pipeline_config(small_config_path)
    assert len(expand_grid(config.grid)) == 4
    assert config.dataset.eval_sets == ["in-dist", "ood-a"]
    assert config.metric("input-noise").noise.target == "input_features"
    assert [spec.k for spec in config.selection.specs()] == [50.0, 100.0]


def test_bundled_toy_config_has_45_runs_and_9_metrics():
    path = Path(__file__).resolve().parents[3] / "configs" / "toy.toml"
    config = load_pipeline_config(path)
    assert len(expand_grid(config.grid)) == 45
    assert len(config.metrics) == 9
    assert config.selection.criteria == ["style-minority", "ood-a", "output-noise", "pgd-0.005"]
    assert config.selection.unforeseen == ["age-old", "ood-b", "input-noise", "pgd-0.01"]
    assert "accuracy" not in config.selection.criteria + config.selection.unforeseen


def test_seed_override_replaces_seeds(small_config_path):
    config = load_pipeline_config(small_config_path, seed_override=[7, 8, 9])
    assert config.grid.seeds == [7, 8, 9]
    assert len(expand_grid(config.grid)) == 6


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_pipeline_config(tmp_path / "absent.toml")
    broken = tmp_path / "broken.toml"
    broken.write_text("[dataset\nnum_classes = 2\n")
    with pytest.raises(ConfigError, match="Invalid TOML"):
        load_pipeline_config(broken)


def test_unknown_optimizer_fails_validation(small_config_path):
    edit(small_config_path, 'values = [0.1, 0.05]', 'values = [0.1, 0.05]\n\n[grid.default]\noptimizer = "rmsprop"')
    with pytest.raises(ValidationError, match="optimizer"):
        load_pipeline_config(small_config_path)


def test_unknown_eval_set(small_config_path):
    edit(small_config_path, 'eval_set = "ood-a"', 'eval_set = "ood-z"')
    with pytest.raises(ValidationError, match="ood-z"):
        load_pipeline_config(small_config_path)


def test_duplicate_metric_ids(small_config_path):
    edit(small_config_path, 'metric_id = "minority"', 'metric_id = "accuracy"')
    with pytest.raises(ValidationError, match="unique"):
        load_pipeline_config(small_config_path)


def test_selection_must_reference_metrics(small_config_path):
    edit(small_config_path, 'unforeseen = ["minority", "pgd"]', 'unforeseen = ["minority", "nope"]')
    with pytest.raises(ValidationError, match="nope"):
        load_pipeline_config(small_config_path)


def test_unknown_augmentation(small_config_path):
    edit(small_config_path, "[train]\nepochs = 3", '[train]\nepochs = 3\njitter_scales = { jitter-b = 0.05 }')
    with pytest.raises(ValidationError, match="jitter-a"):
        load_pipeline_config(small_config_path)


def test_unknown_metric_lookup(small_config_path):
    config = load_pipeline_config(small_config_path)
    with pytest.raises(ValueError, match="available"):
        config.metric("fairness")
