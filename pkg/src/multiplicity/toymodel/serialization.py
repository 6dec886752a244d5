"""
Plain-text parameter files.

    architecture mlp-small
    layers 2
    weight 2 16
    <32 values, one per line>
    bias 16
    <16 values>
    ...
"""

import logging
from pathlib import Path

import numpy as np

from multiplicity.integration.files import atomic_write_text
from multiplicity.toymodel.mlp import MLPParams

logger = logging.getLogger(__name__)


def _format(value: float) -> str:
    return format(float(value), ".17g")


def dumps_params(params: MLPParams) -> str:
    params.validate()
    lines = [f"architecture {params.architecture}", f"layers {len(params.weights)}"]
    for weight, bias in zip(params.weights, params.biases):
        lines.append(f"weight {weight.shape[0]} {weight.shape[1]}")
        lines.extend(_format(v) for v in weight.ravel())
        lines.append(f"bias {bias.shape[0]}")
        lines.extend(_format(v) for v in bias.ravel())
    return "\n".join(lines) + "\n"


def loads_params(text: str) -> MLPParams:
    lines = iter(text.splitlines())

    def header(expected: str) -> list[str]:
        parts = next(lines, "").split()
        if not parts or parts[0] != expected:
            raise ValueError(f"expected a {expected!r} header, got {parts!r}")
        return parts[1:]

    def values(count: int) -> np.ndarray:
        try:
            return np.array([float(next(lines)) for _ in range(count)])
        except StopIteration:
            raise ValueError("parameter file is truncated") from None

    (architecture,) = header("architecture")
    (layer_count,) = header("layers")

    weights, biases = [], []
    for _ in range(int(layer_count)):
        rows, cols = (int(v) for v in header("weight"))
        weights.append(values(rows * cols).reshape(rows, cols))
        (size,) = header("bias")
        biases.append(values(int(size)))

    params = MLPParams(weights=weights, biases=biases, architecture=architecture)
    params.validate()
    return params


def save_params(params: MLPParams, path: Path) -> Path:
    return atomic_write_text(Path(path), dumps_params(params))


def load_params(path: Path) -> MLPParams:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Parameter file not found: {path}")
    try:
        return loads_params(path.read_text(encoding="utf-8"))
    except ValueError as e:
        logger.error(f"Error reading parameters from {path}: {e}")
        raise ValueError(f"Failed to read parameter file {path}: {e}") from e
