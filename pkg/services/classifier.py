"""
Classifier module.

Contains the feed-forward ReLU classifier: forward pass, analytic input
gradients of scalar heads, seeded SGD training, last-layer randomization and
the JSON model file format.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, PositiveFloat, PositiveInt, ValidationError

from config import BATCH_SIZE, EPOCHS, L2_PENALTY, LEARNING_RATE, SEED
from services.errors import DataError, DimensionError, ModelFormatError, NumericError

logger = logging.getLogger(__name__)


class Activation(str, Enum):
    RELU = "relu"
    IDENTITY = "identity"


@dataclass(frozen=True, eq=False)
class Layer:
    """Affine map followed by an activation. Arrays are copied and made read-only."""

    weights: np.ndarray
    bias: np.ndarray
    activation: Activation = Activation.IDENTITY

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64)
        bias = np.array(self.bias, dtype=np.float64)
        if weights.ndim != 2:
            raise DimensionError(f"weights must be a matrix, got shape {weights.shape}")
        if bias.shape != (weights.shape[0],):
            raise DimensionError(
                f"bias length {bias.size} does not match weight row count {weights.shape[0]}"
            )
        weights.setflags(write=False)
        bias.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "activation", Activation(self.activation))

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True, eq=False)
class Model:
    """Immutable classifier; the final layer emits raw logits."""

    layers: Tuple[Layer, ...]
    train_accuracy: Optional[float] = field(default=None, compare=False)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise DimensionError("model needs at least one layer")
        for i in range(1, len(layers)):
            if layers[i].in_dim != layers[i - 1].out_dim:
                raise DimensionError(
                    f"layer {i} expects {layers[i].in_dim} inputs but layer {i - 1} "
                    f"produces {layers[i - 1].out_dim}"
                )
        if layers[-1].activation is not Activation.IDENTITY:
            raise DimensionError("final layer must use the identity activation (raw logits)")
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def num_classes(self) -> int:
        return self.layers[-1].out_dim


# Scalar heads whose input gradient the engine computes

@dataclass(frozen=True)
class Logit:
    """z_c"""

    cls: int


@dataclass(frozen=True)
class Margin:
    """max_{j != y} z_j - z_y"""

    label: int


@dataclass(frozen=True)
class TargetMargin:
    """z_t - max_{j != t} z_j"""

    target: int


@dataclass(frozen=True)
class PairMargin:
    """z_j - z_y"""

    cls: int
    label: int


ScalarHead = Union[Logit, Margin, TargetMargin, PairMargin]


class TrainConfig(BaseModel):
    """Hyper-parameters for train_sgd."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    learning_rate: PositiveFloat = LEARNING_RATE
    epochs: PositiveInt = EPOCHS
    batch_size: PositiveInt = BATCH_SIZE
    seed: int = SEED
    l2_penalty: NonNegativeFloat = L2_PENALTY


def check_input(model: Model, x) -> np.ndarray:
    """Validate x as one input (d,) or a batch (n, d)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != model.input_dim:
        raise DimensionError(
            f"input of shape {x.shape} does not match model input_dim {model.input_dim}"
        )
    return x


def forward_trace(model: Model, x) -> Tuple[np.ndarray, List[np.ndarray]]:
    """
    Run the forward pass and keep every pre-activation.

    Args:
        model: Classifier
        x: Input vector (d,) or batch (n, d)

    Returns:
        Tuple of (logits, list of pre-activations per layer)
    """
    h = check_input(model, x)
    pre_activations = []
    for layer in model.layers:
        pre = h @ layer.weights.T + layer.bias
        pre_activations.append(pre)
        h = np.maximum(pre, 0.0) if layer.activation is Activation.RELU else pre
    if not np.all(np.isfinite(h)):
        raise NumericError("forward pass produced non-finite logits")
    return h, pre_activations


def forward(model: Model, x) -> np.ndarray:
    """Logits for one input (C,) or a batch (n, C)."""
    logits, _ = forward_trace(model, x)
    return logits


def argmax_lowest(logits: np.ndarray) -> np.ndarray:
    """Row-wise argmax; np.argmax already returns the first (lowest) index on ties."""
    return np.argmax(logits, axis=-1)


def predict(model: Model, x) -> Union[int, np.ndarray]:
    """Predicted class of one input, or an array of classes for a batch."""
    classes = argmax_lowest(forward(model, x))
    return int(classes) if np.ndim(classes) == 0 else classes


def softmax_probs(logits) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def _runner_up(logits: np.ndarray, excluded: int) -> np.ndarray:
    masked = np.array(logits, copy=True)
    masked[..., excluded] = -np.inf
    return np.argmax(masked, axis=-1)


def _check_head(head: ScalarHead, num_classes: int) -> None:
    for value in vars(head).values():
        if not 0 <= value < num_classes:
            raise ValueError(f"class index {value} out of range for {num_classes} classes in {head}")


def head_coefficients(logits: np.ndarray, head: ScalarHead) -> np.ndarray:
    """
    d(head)/d(logits) at the given logits.

    Args:
        logits: Array (C,) or (n, C)
        head: Scalar head

    Returns:
        Array with the same shape as logits
    """
    z = np.asarray(logits, dtype=np.float64)
    num_classes = z.shape[-1]
    _check_head(head, num_classes)
    flat = z.reshape(-1, num_classes)
    coeff = np.zeros_like(flat)
    rows = np.arange(flat.shape[0])
    if isinstance(head, Logit):
        coeff[:, head.cls] = 1.0
    elif isinstance(head, Margin):
        coeff[rows, _runner_up(flat, head.label)] += 1.0
        coeff[:, head.label] -= 1.0
    elif isinstance(head, TargetMargin):
        coeff[:, head.target] += 1.0
        coeff[rows, _runner_up(flat, head.target)] -= 1.0
    elif isinstance(head, PairMargin):
        coeff[:, head.cls] += 1.0
        coeff[:, head.label] -= 1.0
    else:
        raise TypeError(f"unknown scalar head {head!r}")
    return coeff.reshape(z.shape)


def head_value(logits: np.ndarray, head: ScalarHead) -> np.ndarray:
    """Value of the head at the given logits (scalar or per row)."""
    z = np.asarray(logits, dtype=np.float64)
    return np.sum(head_coefficients(z, head) * z, axis=-1)


def input_gradient(model: Model, x, head: ScalarHead) -> np.ndarray:
    """
    Exact input gradient of a scalar head by reverse-mode chain rule.

    The ReLU subgradient at exactly 0 is taken as 0.

    Args:
        model: Classifier
        x: Input vector (d,) or batch (n, d)
        head: Scalar head to differentiate

    Returns:
        Gradient with the shape of x
    """
    logits, pre_activations = forward_trace(model, x)
    grad = head_coefficients(logits, head)
    for layer, pre in zip(reversed(model.layers), reversed(pre_activations)):
        if layer.activation is Activation.RELU:
            grad = grad * (pre > 0.0)
        grad = grad @ layer.weights
    if not np.all(np.isfinite(grad)):
        raise NumericError("input gradient is not finite")
    return grad


def glorot_layer(rng: np.random.Generator, in_dim: int, out_dim: int, activation: Activation) -> Layer:
    """Uniform(+-sqrt(6/(fan_in+fan_out))) weights, zero bias."""
    limit = math.sqrt(6.0 / (in_dim + out_dim))
    weights = rng.uniform(-limit, limit, size=(out_dim, in_dim))
    return Layer(weights, np.zeros(out_dim), activation)


def _stack_examples(dataset) -> Tuple[np.ndarray, np.ndarray]:
    if hasattr(dataset, "features") and hasattr(dataset, "labels"):
        return np.asarray(dataset.features, dtype=np.float64), np.asarray(dataset.labels, dtype=np.int64)
    examples = list(dataset)
    if not examples:
        raise ValueError("cannot train on an empty dataset")
    features = np.stack([np.asarray(e.x, dtype=np.float64) for e in examples])
    labels = np.array([e.label for e in examples], dtype=np.int64)
    return features, labels


def train_sgd(dataset, layer_sizes: Sequence[int], config: TrainConfig = TrainConfig()) -> Model:
    """
    Train a ReLU network with minibatch SGD on softmax cross-entropy.

    Deterministic for a fixed seed: the generator first draws every layer's
    weights, then one permutation per epoch.

    Args:
        dataset: Dataset or sequence of Example
        layer_sizes: Full architecture [d, hidden..., C]
        config: TrainConfig

    Returns:
        Trained Model with train_accuracy recorded
    """
    features, labels = _stack_examples(dataset)
    if features.shape[0] == 0:
        raise ValueError("cannot train on an empty dataset")
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2 or any(s <= 0 for s in sizes):
        raise ValueError(f"invalid architecture {sizes}")
    if sizes[0] != features.shape[1]:
        raise DimensionError(f"architecture input {sizes[0]} does not match data dimension {features.shape[1]}")
    if labels.min() < 0 or labels.max() >= sizes[-1]:
        raise ValueError(f"labels must lie in [0, {sizes[-1]}) for this architecture")

    rng = np.random.default_rng(config.seed)
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        act = Activation.IDENTITY if i == len(sizes) - 2 else Activation.RELU
        layer = glorot_layer(rng, fan_in, fan_out, act)
        weights.append(np.array(layer.weights))
        biases.append(np.array(layer.bias))

    n = features.shape[0]
    onehot = np.eye(sizes[-1])[labels]
    last = len(weights) - 1
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            h = features[idx]
            inputs, pres = [], []
            for i, (w, b) in enumerate(zip(weights, biases)):
                inputs.append(h)
                pre = h @ w.T + b
                pres.append(pre)
                h = pre if i == last else np.maximum(pre, 0.0)
            delta = (softmax_probs(h) - onehot[idx]) / len(idx)
            for i in range(last, -1, -1):
                if i != last:
                    delta = delta * (pres[i] > 0.0)
                grad_w = delta.T @ inputs[i]
                grad_b = delta.sum(axis=0)
                if i > 0:
                    delta_next = delta @ weights[i]
                weights[i] -= config.learning_rate * (grad_w + config.l2_penalty * weights[i])
                biases[i] -= config.learning_rate * grad_b
                if i > 0:
                    delta = delta_next
        if not all(np.all(np.isfinite(w)) for w in weights):
            raise NumericError(f"training diverged at epoch {epoch + 1}; lower the learning rate")

    layers = tuple(
        Layer(w, b, Activation.IDENTITY if i == last else Activation.RELU)
        for i, (w, b) in enumerate(zip(weights, biases))
    )
    model = Model(layers)
    accuracy = float(np.mean(predict(model, features) == labels))
    logger.info(f"Trained {sizes} for {config.epochs} epochs, train accuracy {accuracy:.4f}")
    return Model(layers, train_accuracy=accuracy)


def randomize_last_layer(model: Model, seed: int) -> Model:
    """
    Re-draw the final layer from the training init distribution.

    Every earlier layer is reused as-is, so its parameters stay bit-identical.
    """
    rng = np.random.default_rng(seed)
    final = model.layers[-1]
    fresh = glorot_layer(rng, final.in_dim, final.out_dim, final.activation)
    return Model(model.layers[:-1] + (fresh,))


class LayerRecord(BaseModel):
    """One layer as stored in a model file."""

    model_config = ConfigDict(extra="forbid")

    out_dim: int = Field(gt=0)
    in_dim: int = Field(gt=0)
    weights: List[float]
    bias: List[float]
    activation: Literal["relu", "identity"]


class ModelRecord(BaseModel):
    """Model file schema."""

    model_config = ConfigDict(extra="forbid")

    input_dim: int = Field(gt=0)
    num_classes: int = Field(gt=0)
    layers: List[LayerRecord] = Field(min_length=1)


def model_to_dict(model: Model) -> dict:
    return {
        "input_dim": model.input_dim,
        "num_classes": model.num_classes,
        "layers": [
            {
                "out_dim": layer.out_dim,
                "in_dim": layer.in_dim,
                "weights": layer.weights.ravel().tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation.value,
            }
            for layer in model.layers
        ],
    }


def model_from_record(record: ModelRecord) -> Model:
    """Build a Model, reporting which layer breaks which invariant."""
    layers = []
    for i, rec in enumerate(record.layers):
        if len(rec.weights) != rec.out_dim * rec.in_dim:
            raise DimensionError(
                f"layers[{i}].weights: expected {rec.out_dim}x{rec.in_dim}={rec.out_dim * rec.in_dim} "
                f"values, got {len(rec.weights)}"
            )
        if len(rec.bias) != rec.out_dim:
            raise DimensionError(f"layers[{i}].bias: expected {rec.out_dim} values, got {len(rec.bias)}")
        weights = np.array(rec.weights, dtype=np.float64).reshape(rec.out_dim, rec.in_dim)
        layers.append(Layer(weights, np.array(rec.bias, dtype=np.float64), Activation(rec.activation)))
    model = Model(tuple(layers))
    if model.input_dim != record.input_dim:
        raise DimensionError(f"input_dim: file says {record.input_dim}, first layer has {model.input_dim}")
    if model.num_classes != record.num_classes:
        raise DimensionError(f"num_classes: file says {record.num_classes}, last layer has {model.num_classes}")
    return model


def save_model(model: Model, path) -> None:
    """
    Write the model as JSON.

    Floats are written with Python's shortest round-trip repr, so loading
    recovers every value exactly and save(load(save(m))) is byte-identical.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(model_to_dict(model), indent=2) + "\n")
    except OSError as e:
        raise DataError(f"Error writing model to {path}: {str(e)}") from e


def load_model(path) -> Model:
    """
    Read a model file.

    Raises:
        DataError: file missing or unreadable
        ModelFormatError: bad JSON (with line/column) or schema violation (with field path)
        DimensionError: inconsistent shapes
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise DataError(f"Error reading model {path}: {str(e)}") from e
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from e
    try:
        record = ModelRecord.model_validate(raw)
    except ValidationError as e:
        details = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise ModelFormatError(f"{path}: {details}") from e
    return model_from_record(record)
