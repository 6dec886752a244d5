"""
Multilayer perceptron with tanh hidden layers and hand-written backpropagation.
"""

from dataclasses import dataclass

import numpy as np

ARCHITECTURES: dict[str, tuple[int, ...]] = {
    "linear": (),
    "mlp-small": (16,),
    "mlp-deep": (16, 16, 16),
    "mlp-wide": (64, 64),
}


@dataclass
class MLPParams:
    """Weights (fan_in, fan_out) and biases (fan_out,), input layer first."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    architecture: str

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def num_classes(self) -> int:
        return self.weights[-1].shape[1]

    def shapes(self) -> list[tuple[int, ...]]:
        shapes: list[tuple[int, ...]] = []
        for weight, bias in zip(self.weights, self.biases):
            shapes.extend([weight.shape, bias.shape])
        return shapes

    def arrays(self) -> list[np.ndarray]:
        """Interleaved [W0, b0, W1, b1, ...]."""
        arrays: list[np.ndarray] = []
        for weight, bias in zip(self.weights, self.biases):
            arrays.extend([weight, bias])
        return arrays

    def copy(self) -> "MLPParams":
        return MLPParams(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            architecture=self.architecture,
        )

    def zeros_like(self) -> "MLPParams":
        return MLPParams(
            weights=[np.zeros_like(w) for w in self.weights],
            biases=[np.zeros_like(b) for b in self.biases],
            architecture=self.architecture,
        )

    def validate(self) -> None:
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("weights and biases must be non-empty and paired")
        for index, (weight, bias) in enumerate(zip(self.weights, self.biases)):
            if weight.ndim != 2 or bias.shape != (weight.shape[1],):
                raise ValueError(f"layer {index} has inconsistent shapes")
            if index and weight.shape[0] != self.weights[index - 1].shape[1]:
                raise ValueError(f"layer {index} does not chain from layer {index - 1}")
            if not (np.all(np.isfinite(weight)) and np.all(np.isfinite(bias))):
                raise ValueError(f"layer {index} has non-finite entries")


def hidden_widths(architecture: str) -> tuple[int, ...]:
    try:
        return ARCHITECTURES[architecture]
    except KeyError:
        raise ValueError(
            f"Unknown architecture {architecture!r}; "
            f"expected one of {sorted(ARCHITECTURES)}"
        ) from None


def init_params(
    architecture: str,
    input_dim: int,
    num_classes: int,
    seed: int | np.random.Generator,
) -> MLPParams:
    """
    Glorot-uniform weights, zero biases.

    `seed` may be a Generator so that training can draw initialization,
    shuffling and jitter from one stream.
    """
    if input_dim < 1 or num_classes < 2:
        raise ValueError("input_dim must be >= 1 and num_classes >= 2")
    widths = (input_dim, *hidden_widths(architecture), num_classes)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MLPParams(weights=weights, biases=biases, architecture=architecture)


def _check_inputs(params: MLPParams, inputs: np.ndarray) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[1] != params.input_dim:
        raise ValueError(
            f"inputs of shape {inputs.shape} do not match input_dim {params.input_dim}"
        )
    return inputs


def _forward_cache(params: MLPParams, inputs: np.ndarray) -> list[np.ndarray]:
    """Activations of every layer, inputs first and logits last."""
    activations = [inputs]
    last = len(params.weights) - 1
    for index, (weight, bias) in enumerate(zip(params.weights, params.biases)):
        z = activations[-1] @ weight + bias
        activations.append(z if index == last else np.tanh(z))
    return activations


def forward(params: MLPParams, inputs: np.ndarray) -> np.ndarray:
    inputs = _check_inputs(params, inputs)
    return _forward_cache(params, inputs)[-1]


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _check_labels(labels: np.ndarray, rows: int, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (rows,):
        raise ValueError(f"labels of shape {labels.shape}, expected ({rows},)")
    if np.any(labels < 0) or np.any(labels >= num_classes):
        raise ValueError("labels out of range")
    return labels


def _backward(
    params: MLPParams, activations: list[np.ndarray], dlogits: np.ndarray
) -> tuple[MLPParams, np.ndarray]:
    grads = params.zeros_like()
    delta = dlogits
    for index in range(len(params.weights) - 1, -1, -1):
        grads.weights[index] = activations[index].T @ delta
        grads.biases[index] = delta.sum(axis=0)
        delta = delta @ params.weights[index].T
        if index > 0:
            # activations[index] is tanh of the previous layer's pre-activation
            delta = delta * (1.0 - activations[index] ** 2)
    return grads, delta


def loss_and_grads(
    params: MLPParams, inputs: np.ndarray, labels: np.ndarray
) -> tuple[float, MLPParams]:
    """Mean cross-entropy over the batch and its exact gradient."""
    inputs = _check_inputs(params, inputs)
    labels = _check_labels(labels, inputs.shape[0], params.num_classes)
    rows = inputs.shape[0]

    activations = _forward_cache(params, inputs)
    log_probs = log_softmax(activations[-1])
    loss = -float(log_probs[np.arange(rows), labels].mean())

    dlogits = np.exp(log_probs)
    dlogits[np.arange(rows), labels] -= 1.0
    dlogits /= rows

    grads, _ = _backward(params, activations, dlogits)
    return loss, grads


def input_gradient(
    params: MLPParams, inputs: np.ndarray, labels: np.ndarray
) -> np.ndarray:
    """Row i is the gradient of sample i's own cross-entropy w.r.t. its input."""
    inputs = _check_inputs(params, inputs)
    labels = _check_labels(labels, inputs.shape[0], params.num_classes)
    rows = inputs.shape[0]

    activations = _forward_cache(params, inputs)
    dlogits = np.exp(log_softmax(activations[-1]))
    dlogits[np.arange(rows), labels] -= 1.0

    _, dinputs = _backward(params, activations, dlogits)
    return dinputs


def predict_labels(params: MLPParams, inputs: np.ndarray) -> np.ndarray:
    # np.argmax returns the lowest index among ties
    return np.argmax(forward(params, inputs), axis=1)
