"""Three-layer perceptron (input, one hidden layer, softmax output) in numpy."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BadFile, DimensionMismatch, SingleClass

ACTIVATIONS = ("relu", "identity", "tanh")
PARAM_NAMES = ("W1", "b1", "W2", "b2")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    l2: float = 1e-4
    momentum: float = 0.9
    patience: int | None = None

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning rate must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.l2 < 0 or not 0 <= self.momentum < 1:
            raise ValueError("l2 must be >= 0 and momentum in [0, 1)")


@dataclass
class MlpModel:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    activation: str = "relu"
    labels: tuple = ()
    final_train_loss: float = float("nan")
    loss_history: list = field(default_factory=list, repr=False)

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def n_classes(self) -> int:
        return self.W2.shape[0]

    def params(self):
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self):
        return replace(self, **{k: v.copy() for k, v in self.params().items()}, loss_history=list(self.loss_history))


def _act(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _act_grad(z, a, kind):
    if kind == "relu":
        return (z > 0).astype(z.dtype)
    if kind == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def init_model(input_dim, n_classes, hidden_dim=100, activation="relu", seed=0, labels=None) -> MlpModel:
    """He-initialised weights, zero biases."""
    if activation not in ACTIVATIONS:
        raise ValueError(f"activation must be one of {ACTIVATIONS}")
    rng = np.random.default_rng(seed)
    W1 = rng.normal(0.0, np.sqrt(2.0 / input_dim), size=(hidden_dim, input_dim))
    W2 = rng.normal(0.0, np.sqrt(2.0 / hidden_dim), size=(n_classes, hidden_dim))
    labels = tuple(labels) if labels is not None else tuple(str(i) for i in range(n_classes))
    return MlpModel(W1, np.zeros(hidden_dim), W2, np.zeros(n_classes), activation, labels)


def _as_matrix(x):
    values = getattr(x, "values", x)
    a = np.asarray(values, dtype=np.float64)
    return a[None, :] if a.ndim == 1 else a


def logits(model: MlpModel, x) -> np.ndarray:
    h = _act(_as_matrix(x) @ model.W1.T + model.b1, model.activation)
    return h @ model.W2.T + model.b2


def predict(model: MlpModel, x) -> np.ndarray:
    """Class probabilities; a single vector in gives a single vector out."""
    a = np.asarray(getattr(x, "values", x))
    if a.shape[-1] != model.input_dim:
        raise DimensionMismatch(f"input dim {a.shape[-1]} != model input dim {model.input_dim}")
    p = _softmax(logits(model, a))
    return p[0] if a.ndim == 1 else p


def predict_labels(model: MlpModel, x) -> list:
    p = np.atleast_2d(predict(model, x))
    return [model.labels[i] for i in np.argmax(p, axis=1)]


def loss_and_grads(model: MlpModel, x, y, l2=0.0):
    """Mean softmax cross-entropy (+ 0.5 * l2 * |W|^2) and its gradients."""
    x = _as_matrix(x)
    y = np.asarray(y, dtype=int)
    n = len(x)
    z1 = x @ model.W1.T + model.b1
    h = _act(z1, model.activation)
    p = _softmax(h @ model.W2.T + model.b2)
    loss = -np.mean(np.log(np.maximum(p[np.arange(n), y], 1e-300)))
    loss += 0.5 * l2 * (np.sum(model.W1**2) + np.sum(model.W2**2))
    d2 = p.copy()
    d2[np.arange(n), y] -= 1.0
    d2 /= n
    grads = {"W2": d2.T @ h + l2 * model.W2, "b2": d2.sum(axis=0)}
    d1 = (d2 @ model.W2) * _act_grad(z1, h, model.activation)
    grads["W1"] = d1.T @ x + l2 * model.W1
    grads["b1"] = d1.sum(axis=0)
    return float(loss), grads


def _f32_exact(a):
    return np.asarray(a, dtype=np.float32).astype(np.float64)


def train(x, labels, cfg: TrainConfig = TrainConfig(), hidden_dim=100, activation="relu") -> MlpModel:
    """Minibatch SGD with momentum on softmax cross-entropy.

    Returned weights are rounded to float32 so a saved model reloads bit-exactly.
    """
    rows = [np.asarray(getattr(r, "values", r), dtype=np.float64) for r in x]
    if len({r.shape for r in rows}) > 1:
        raise DimensionMismatch("all training vectors must share one dimension")
    x = np.stack(rows)
    classes = tuple(sorted({str(lab) for lab in labels}))
    if len(classes) < 2:
        raise SingleClass("training needs at least two classes")
    index = {c: i for i, c in enumerate(classes)}
    y = np.array([index[str(lab)] for lab in labels])
    model = init_model(x.shape[1], len(classes), hidden_dim, activation, cfg.seed, classes)
    for name in PARAM_NAMES:
        setattr(model, name, _f32_exact(getattr(model, name)))
    rng = np.random.default_rng(cfg.seed + 1)
    velocity = {k: np.zeros_like(v) for k, v in model.params().items()}
    best, stale = np.inf, 0
    history = []
    for _ in range(cfg.epochs):
        order = rng.permutation(len(x))
        for start in range(0, len(x), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            _, grads = loss_and_grads(model, x[idx], y[idx], cfg.l2)
            for name in PARAM_NAMES:
                velocity[name] = cfg.momentum * velocity[name] - cfg.learning_rate * grads[name]
                setattr(model, name, getattr(model, name) + velocity[name])
        loss, _ = loss_and_grads(model, x, y, cfg.l2)
        history.append(loss)
        if cfg.patience is not None:
            if loss < best - 1e-12:
                best, stale = loss, 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    break
    for name in PARAM_NAMES:
        setattr(model, name, _f32_exact(getattr(model, name)))
    model.final_train_loss = loss_and_grads(model, x, y, cfg.l2)[0]
    model.loss_history = history
    return model


def grad_check(model: MlpModel, x, y, epsilon=1e-5, n_coords=100, seed=0, l2=0.0) -> float:
    """Max relative error between backprop and central differences.

    Checks ``n_coords`` randomly chosen weights (all of them if fewer exist).
    The relative error uses ``|a - n| / max(|a| + |n|, 1e-6)`` so coordinates with
    vanishing gradient are judged on absolute error.
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError("epsilon must lie in [1e-7, 1e-3]")
    m = model.copy()
    _, grads = loss_and_grads(m, x, y, l2)
    coords = [(name, i) for name in PARAM_NAMES for i in range(getattr(m, name).size)]
    rng = np.random.default_rng(seed)
    if len(coords) > n_coords:
        coords = [coords[i] for i in rng.choice(len(coords), size=n_coords, replace=False)]
    worst = 0.0
    for name, i in coords:
        arr = getattr(m, name).reshape(-1)
        orig = arr[i]
        arr[i] = orig + epsilon
        plus, _ = loss_and_grads(m, x, y, l2)
        arr[i] = orig - epsilon
        minus, _ = loss_and_grads(m, x, y, l2)
        arr[i] = orig
        numeric = (plus - minus) / (2.0 * epsilon)
        analytic = grads[name].reshape(-1)[i]
        err = abs(analytic - numeric) / max(abs(analytic) + abs(numeric), 1e-6)
        worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# MLP1 files

_MLP_MAGIC = b"MLP1"


def write_mlp(path, model: MlpModel):
    """magic, u32 input/hidden/classes/activation, f32 W1 b1 W2 b2, u32 label count, labels."""
    act = ACTIVATIONS.index(model.activation)
    with open(path, "wb") as fh:
        fh.write(_MLP_MAGIC + struct.pack("<IIII", model.input_dim, model.hidden_dim, model.n_classes, act))
        for name in PARAM_NAMES:
            fh.write(np.ascontiguousarray(getattr(model, name), dtype="<f4").tobytes())
        fh.write(struct.pack("<I", len(model.labels)))
        for lab in model.labels:
            b = str(lab).encode("utf-8")
            fh.write(struct.pack("<I", len(b)) + b)


def read_mlp(path) -> MlpModel:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _MLP_MAGIC or len(raw) < 20:
        raise BadFile(f"{path}: not an MLP1 file")
    d, h, c, act = struct.unpack_from("<IIII", raw, 4)
    pos = 20
    arrays = []
    for shape in ((h, d), (h,), (c, h), (c,)):
        n = int(np.prod(shape))
        if len(raw) < pos + 4 * n:
            raise BadFile(f"{path}: truncated MLP1 weights")
        arrays.append(np.frombuffer(raw, dtype="<f4", count=n, offset=pos).astype(np.float64).reshape(shape))
        pos += 4 * n
    (count,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    labels = []
    for _ in range(count):
        (n,) = struct.unpack_from("<I", raw, pos)
        labels.append(raw[pos + 4 : pos + 4 + n].decode("utf-8"))
        pos += 4 + n
    return MlpModel(*arrays, activation=ACTIVATIONS[act], labels=tuple(labels))
