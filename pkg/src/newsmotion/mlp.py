"""Feed-forward classifier: ReLU hidden layers, two-node softmax output.

Training is plain mini-batch gradient descent on cross-entropy with
optional L2, a step-decayed learning rate, and model selection by best
validation error. Everything is deterministic in the config seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ParseError, TrainingDiverged, ValidationError
from .features import FeatureLayout, FeatureMatrix
from .sampling import NEGATIVE, POSITIVE

UP = "up"
DOWN = "down"
# Output node order: index 0 = up, index 1 = down.
CLASSES = (UP, DOWN)


def direction_of(label: str) -> str:
    """Map a movement label (positive/negative) to a predicted direction."""
    if label == POSITIVE:
        return UP
    if label == NEGATIVE:
        return DOWN
    raise ValidationError(f"cannot map label {label!r} to a direction")


@dataclass
class MlpModel:
    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]  # per layer, shape (fan_out, fan_in)
    biases: list[np.ndarray]
    layout: FeatureLayout | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        dims = self.layer_dims
        if len(dims) < 2:
            raise ValidationError("need at least input and output layers")
        if any(d <= 0 for d in dims):
            raise ValidationError(f"layer dims must be positive, got {dims}")
        if dims[-1] != 2:
            raise ValidationError(f"output layer must have 2 units, got {dims[-1]}")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ValidationError("one weight matrix and bias vector per layer expected")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[i + 1], dims[i]):
                raise ValidationError(
                    f"layer {i}: weight shape {w.shape} != ({dims[i + 1]}, {dims[i]})"
                )
            if b.shape != (dims[i + 1],):
                raise ValidationError(
                    f"layer {i}: bias shape {b.shape} != ({dims[i + 1]},)"
                )
        if self.layout is not None and self.layout.dimension != dims[0]:
            raise ValidationError(
                f"layout dimension {self.layout.dimension} != input dim {dims[0]}"
            )

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    def copy_parameters(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        return [w.copy() for w in self.weights], [b.copy() for b in self.biases]


@dataclass(frozen=True)
class TrainConfig:
    hidden: tuple[int, ...] = (1024, 1024, 1024, 1024)
    learning_rate: float = 0.05
    decay: float = 0.5
    decay_every: int = 10
    batch_size: int = 64
    epochs: int = 30
    l2: float = 0.0
    seed: int = 1
    patience: int = 0  # epochs without validation improvement; 0 disables

    def __post_init__(self):
        if any(h <= 0 for h in self.hidden):
            raise ValidationError(f"hidden sizes must be positive, got {self.hidden}")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")
        if not 0 < self.decay <= 1:
            raise ValidationError("decay must be in (0, 1]")
        if self.decay_every <= 0 or self.batch_size <= 0:
            raise ValidationError("decay_every and batch_size must be positive")
        if self.epochs < 0 or self.l2 < 0 or self.patience < 0:
            raise ValidationError("epochs, l2, and patience must be non-negative")


def init(
    layer_dims: Sequence[int], seed: int, layout: FeatureLayout | None = None
) -> MlpModel:
    """Glorot-uniform weights, zero biases, deterministic in seed."""
    dims = tuple(int(d) for d in layer_dims)
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims, dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(
        layer_dims=dims,
        weights=weights,
        biases=biases,
        layout=layout,
        metadata={"seed": int(seed)},
    )


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax (max subtraction); accepts 1-D or 2-D input."""
    z = np.asarray(logits, dtype=np.float64)
    squeeze = z.ndim == 1
    if squeeze:
        z = z[None, :]
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=1, keepdims=True)
    return p[0] if squeeze else p


def _forward_pass(
    model: MlpModel, x: np.ndarray
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Returns (pre-activations per layer, activations per layer incl. input)."""
    activations = [x]
    pre = []
    a = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w.T + b
        pre.append(z)
        a = z if i == last else np.maximum(z, 0.0)
        activations.append(a)
    return pre, activations


def logits(model: MlpModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.shape[1] != model.input_dim:
        raise ValidationError(
            f"input dimension {x.shape[1]} != model input {model.input_dim}"
        )
    _, activations = _forward_pass(model, x)
    out = activations[-1]
    return out[0] if squeeze else out


def forward(model: MlpModel, x: np.ndarray) -> tuple[float, float]:
    """Probabilities (p_up, p_down) for one feature vector."""
    p = softmax(logits(model, x))
    return float(p[0]), float(p[1])


def loss_and_gradients(
    model: MlpModel, x: np.ndarray, y: np.ndarray, l2: float = 0.0
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean cross-entropy over the batch plus backpropagated gradients.

    y holds class indices (0 = up, 1 = down). With l2 > 0 the loss adds
    l2/2 times the squared Frobenius norm of every weight matrix (biases
    are not penalized).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValidationError("batch must be a non-empty 2-D array")
    if x.shape[0] != y.shape[0]:
        raise ValidationError("batch inputs and labels have different lengths")
    if x.shape[1] != model.input_dim:
        raise ValidationError(
            f"input dimension {x.shape[1]} != model input {model.input_dim}"
        )
    n = x.shape[0]
    pre, activations = _forward_pass(model, x)
    z_out = pre[-1]
    # log p(label) = z_label - logsumexp(z); stable via max subtraction
    z_max = z_out.max(axis=1, keepdims=True)
    log_norm = z_max[:, 0] + np.log(np.exp(z_out - z_max).sum(axis=1))
    loss = float(np.mean(log_norm - z_out[np.arange(n), y]))
    if l2 > 0:
        loss += 0.5 * l2 * sum(float(np.sum(w * w)) for w in model.weights)

    probs = softmax(z_out)
    delta = probs
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grad_w: list[np.ndarray] = [None] * len(model.weights)
    grad_b: list[np.ndarray] = [None] * len(model.weights)
    for i in range(len(model.weights) - 1, -1, -1):
        grad_w[i] = delta.T @ activations[i]
        if l2 > 0:
            grad_w[i] += l2 * model.weights[i]
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i]) * (pre[i - 1] > 0)
    return loss, grad_w, grad_b


def _encode_labels(labels: Sequence[str]) -> np.ndarray:
    y = np.empty(len(labels), dtype=np.int64)
    for i, label in enumerate(labels):
        if label == POSITIVE:
            y[i] = 0
        elif label == NEGATIVE:
            y[i] = 1
        else:
            raise ValidationError(f"unlabeled or unknown label {label!r}")
    return y


def _error_against(model: MlpModel, x: np.ndarray, y: np.ndarray) -> float:
    p = softmax(logits(model, x))
    # tie at exactly 0.5 predicts down, matching predict()
    predicted = np.where(p[:, 0] > p[:, 1], 0, 1)
    return float(np.mean(predicted != y))


def train(
    train_matrix: FeatureMatrix, valid_matrix: FeatureMatrix, config: TrainConfig
) -> MlpModel:
    """Fit on the training matrix, selecting the best validation-error epoch.

    Records per-epoch train loss and validation error in model metadata.
    Raises TrainingDiverged on non-finite loss.
    """
    if len(train_matrix) == 0 or len(valid_matrix) == 0:
        raise ValidationError("train and validation sets must be non-empty")
    if train_matrix.layout != valid_matrix.layout:
        raise ValidationError("train and validation feature layouts differ")
    x_train = train_matrix.x
    y_train = _encode_labels(train_matrix.labels)
    x_valid = valid_matrix.x
    y_valid = _encode_labels(valid_matrix.labels)

    dims = (train_matrix.layout.dimension, *config.hidden, 2)
    model = init(dims, config.seed, layout=train_matrix.layout)
    rng = np.random.default_rng(config.seed)
    n = x_train.shape[0]

    train_losses: list[float] = []
    valid_errors: list[float] = []
    best_error = np.inf
    best_epoch = -1
    best_params = model.copy_parameters()
    since_best = 0
    for epoch in range(config.epochs):
        lr = config.learning_rate * config.decay ** (epoch // config.decay_every)
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            loss, grad_w, grad_b = loss_and_gradients(
                model, x_train[batch], y_train[batch], config.l2
            )
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss {loss} at epoch {epoch}, batch start {start}; "
                    f"lower the learning rate"
                )
            for i in range(len(model.weights)):
                model.weights[i] -= lr * grad_w[i]
                model.biases[i] -= lr * grad_b[i]
            epoch_loss += loss * len(batch)
        train_losses.append(epoch_loss / n)
        error = _error_against(model, x_valid, y_valid)
        valid_errors.append(error)
        if error < best_error:
            best_error = error
            best_epoch = epoch
            best_params = model.copy_parameters()
            since_best = 0
        else:
            since_best += 1
            if config.patience and since_best >= config.patience:
                break
    if best_epoch >= 0:
        model.weights, model.biases = best_params
    model.metadata = {
        "seed": config.seed,
        "epochs_run": len(train_losses),
        "best_epoch": best_epoch,
        "train_losses": train_losses,
        "validation_errors": valid_errors,
    }
    return model


def predict(model: MlpModel, x: np.ndarray) -> tuple[str, float]:
    """Predicted direction and confidence p_up - p_down; ties predict down."""
    p_up, p_down = forward(model, x)
    label = UP if p_up > p_down else DOWN
    return label, p_up - p_down


def predict_batch(model: MlpModel, x: np.ndarray) -> tuple[list[str], np.ndarray]:
    """Vectorized predict over matrix rows."""
    p = softmax(logits(model, x))
    labels = [UP if row[0] > row[1] else DOWN for row in p]
    return labels, p[:, 0] - p[:, 1]


def save_model(model: MlpModel, path: str | Path) -> None:
    """Binary format: JSON header line, then per-layer weight and bias float64 blocks."""
    header = {
        "layer_dims": list(model.layer_dims),
        "layout": None if model.layout is None else model.layout.to_dict(),
        "metadata": model.metadata,
    }
    with Path(path).open("wb") as fh:
        fh.write(json.dumps(header, separators=(",", ":"), sort_keys=True).encode())
        fh.write(b"\n")
        for w, b in zip(model.weights, model.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_model(path: str | Path) -> MlpModel:
    path = Path(path)
    with path.open("rb") as fh:
        try:
            header = json.loads(fh.readline())
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: bad header: {exc}") from exc
        dims = tuple(int(d) for d in header["layer_dims"])
        layout = (
            None
            if header.get("layout") is None
            else FeatureLayout.from_dict(header["layout"])
        )
        body = fh.read()
    expected = 8 * sum(
        dims[i + 1] * dims[i] + dims[i + 1] for i in range(len(dims) - 1)
    )
    if len(body) != expected:
        raise ParseError(
            f"{path}: expected {expected} parameter bytes, found {len(body)}"
        )
    weights = []
    biases = []
    offset = 0
    for i in range(len(dims) - 1):
        w_count = dims[i + 1] * dims[i]
        w = np.frombuffer(body, dtype="<f8", count=w_count, offset=offset)
        offset += 8 * w_count
        b = np.frombuffer(body, dtype="<f8", count=dims[i + 1], offset=offset)
        offset += 8 * dims[i + 1]
        weights.append(w.reshape(dims[i + 1], dims[i]).copy())
        biases.append(b.copy())
    return MlpModel(
        layer_dims=dims,
        weights=weights,
        biases=biases,
        layout=layout,
        metadata=header.get("metadata", {}),
    )
