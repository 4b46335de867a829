"""Dense neural-network engine with hand-written reverse-mode gradients.

Layers: SAGE-style graph layers (mean-pool over neighbors, concat with the
node's own state, then linear + optional ReLU) and plain dense layers.
Training is full batch with Adam (decoupled weight decay) and early
stopping on validation accuracy. Everything is float64 with a fixed
summation order, so runs are reproducible bit for bit for a given seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import Graph
from .validation import check_fraction, check_positive_int

__all__ = [
    "LayerSpec",
    "Params",
    "TrainConfig",
    "TrainResult",
    "TrainingError",
    "sage_forward",
    "dense_forward",
    "mean_aggregate",
    "softmax_cross_entropy",
    "log_softmax",
    "dropout_forward",
    "adam_step",
    "train",
    "save_params",
    "load_params",
]

_KINDS = ("sage", "dense")
_ACTIVATIONS = ("relu", "none")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class TrainingError(RuntimeError):
    """Raised when optimization produces non-finite values."""


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_dim: int
    out_dim: int
    activation: str = "relu"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        check_positive_int(self.in_dim, "in_dim")
        check_positive_int(self.out_dim, "out_dim")

    @property
    def weight_rows(self) -> int:
        # SAGE weights act on [h_v || mean(h_u)], hence 2x the input width.
        return 2 * self.in_dim if self.kind == "sage" else self.in_dim


class Params:
    """Weights plus matching gradient and Adam moment buffers.

    Layer ``i`` owns a weight matrix ``W[i]`` of shape
    ``(specs[i].weight_rows, specs[i].out_dim)`` and a bias ``b[i]``.
    """

    def __init__(self, specs, rng: np.random.Generator):
        self.specs = tuple(specs)
        self.W, self.b = [], []
        for spec in self.specs:
            rows, cols = spec.weight_rows, spec.out_dim
            limit = np.sqrt(6.0 / (rows + cols))
            self.W.append(rng.uniform(-limit, limit, size=(rows, cols)))
            self.b.append(np.zeros(cols))
        self.gW = [np.zeros_like(w) for w in self.W]
        self.gb = [np.zeros_like(v) for v in self.b]
        self.mW = [np.zeros_like(w) for w in self.W]
        self.vW = [np.zeros_like(w) for w in self.W]
        self.mb = [np.zeros_like(v) for v in self.b]
        self.vb = [np.zeros_like(v) for v in self.b]
        self.step_count = 0

    def zero_grads(self) -> None:
        for g in self.gW:
            g[:] = 0.0
        for g in self.gb:
            g[:] = 0.0

    def copy_weights(self):
        return [w.copy() for w in self.W], [v.copy() for v in self.b]

    def load_weights(self, snapshot) -> None:
        W, b = snapshot
        for dst, src in zip(self.W, W):
            dst[:] = src
        for dst, src in zip(self.b, b):
            dst[:] = src

    @property
    def num_parameters(self) -> int:
        return sum(w.size for w in self.W) + sum(v.size for v in self.b)

    def flat_iter(self):
        """Yield (name, weight, grad) triples in a fixed order."""
        for i, (w, g) in enumerate(zip(self.W, self.gW)):
            yield f"W{i}", w, g
        for i, (v, g) in enumerate(zip(self.b, self.gb)):
            yield f"b{i}", v, g


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def mean_aggregation_matrix(g: Graph) -> sp.csr_matrix:
    """Row-normalized adjacency D^-1 A; rows of isolated nodes are zero."""
    deg = g.degrees.astype(np.float64)
    data = np.repeat(np.where(deg > 0, 1.0 / np.maximum(deg, 1.0), 0.0), g.degrees)
    return sp.csr_matrix(
        (data, g.col_indices, g.row_offsets), shape=(g.num_nodes, g.num_nodes)
    )


def mean_aggregate(g: Graph, H: np.ndarray) -> np.ndarray:
    """Mean of H over each node's neighborhood (zeros when empty)."""
    return mean_aggregation_matrix(g) @ H


def sage_forward(spec: LayerSpec, W: np.ndarray, b: np.ndarray, g: Graph, H: np.ndarray) -> np.ndarray:
    """One SAGE layer: activation(W' [h_v || mean_{u in N(v)} h_u] + b)."""
    if H.shape != (g.num_nodes, spec.in_dim):
        raise ValueError(
            f"H has shape {H.shape}, expected ({g.num_nodes}, {spec.in_dim})"
        )
    r = mean_aggregate(g, H)
    z = H @ W[: spec.in_dim] + r @ W[spec.in_dim:] + b
    return relu(z) if spec.activation == "relu" else z


def dense_forward(spec: LayerSpec, W: np.ndarray, b: np.ndarray, X: np.ndarray) -> np.ndarray:
    if X.shape[1] != spec.in_dim:
        raise ValueError(f"X has {X.shape[1]} columns, expected {spec.in_dim}")
    z = X @ W + b
    return relu(z) if spec.activation == "relu" else z


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over rows and its gradient w.r.t. the logits.

    Uses the log-sum-exp formulation, so arbitrarily large logits are safe.
    The gradient of each row is (softmax - onehot) / num_rows.
    """
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if logits.ndim != 2 or logits.shape[0] != labels.size:
        raise ValueError(
            f"logits shape {logits.shape} incompatible with {labels.size} labels"
        )
    n = labels.size
    logp = log_softmax(logits)
    loss = -float(logp[np.arange(n), labels].sum() / n)
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return loss, grad


def dropout_forward(X: np.ndarray, p: float, rng: np.random.Generator | None, training: bool):
    """Inverted dropout: kept units are scaled by 1/(1-p).

    Returns ``(output, mask)``; the mask is ``None`` when the call is an
    identity (eval mode or p == 0).
    """
    check_fraction(p, "dropout p", inclusive_high=False)
    if not training or p == 0.0:
        return X, None
    if rng is None:
        raise ValueError("dropout in training mode requires an rng")
    mask = (rng.random(X.shape) >= p) / (1.0 - p)
    return X * mask, mask


def adam_step(params: Params, learning_rate: float, weight_decay: float = 0.0) -> None:
    """One Adam update from the gradients stored in ``params``.

    Weight decay is decoupled: ``w <- w - lr * wd * w`` is applied before
    the moment update touches the weights.
    """
    params.step_count += 1
    t = params.step_count
    c1 = 1.0 - ADAM_BETA1**t
    c2 = 1.0 - ADAM_BETA2**t
    groups = (
        (params.W, params.gW, params.mW, params.vW),
        (params.b, params.gb, params.mb, params.vb),
    )
    for weights, grads, ms, vs in groups:
        for w, g, m, v in zip(weights, grads, ms, vs):
            if weight_decay:
                w -= learning_rate * weight_decay * w
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * np.square(g)
            w -= learning_rate * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    max_epochs: int = 500
    patience: int = 50
    dropout_p: float = 0.2
    weight_decay: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")
        check_positive_int(self.max_epochs, "max_epochs")
        check_positive_int(self.patience, "patience")
        if self.patience > self.max_epochs:
            raise ValueError("patience must not exceed max_epochs")
        check_fraction(self.dropout_p, "dropout_p", inclusive_high=False)


@dataclass
class TrainResult:
    best_weights: tuple
    best_epoch: int
    best_val_accuracy: float
    history: list


def train(problem, params: Params, config: TrainConfig) -> TrainResult:
    """Full-batch training loop with early stopping.

    ``problem`` supplies ``loss_and_grads(params, rng, dropout_p)``,
    ``val_accuracy(params)`` and optionally ``diagnose_nonfinite(params)``
    for the error message when the loss blows up. The parameter snapshot
    with the best validation accuracy is returned; training stops after
    ``patience`` epochs without improvement.
    """
    rng = np.random.default_rng(config.seed)
    best_acc = -np.inf
    best_weights = params.copy_weights()
    best_epoch = 0
    epochs_since_best = 0
    history = []
    for epoch in range(1, config.max_epochs + 1):
        loss = problem.loss_and_grads(params, rng, config.dropout_p)
        if not np.isfinite(loss):
            where = ""
            diagnose = getattr(problem, "diagnose_nonfinite", None)
            if diagnose is not None:
                layer = diagnose(params)
                if layer:
                    where = f" (first non-finite output at layer {layer})"
            raise TrainingError(f"non-finite loss at epoch {epoch}{where}")
        adam_step(params, config.learning_rate, config.weight_decay)
        val_acc = problem.val_accuracy(params)
        history.append({"epoch": epoch, "loss": loss, "val_accuracy": val_acc})
        if val_acc > best_acc:
            best_acc = val_acc
            best_weights = params.copy_weights()
            best_epoch = epoch
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= config.patience:
                break
    return TrainResult(best_weights, best_epoch, float(best_acc), history)


CHECKPOINT_VERSION = 1


def save_params(params: Params, path) -> None:
    """Write a version-1 checkpoint: layer specs plus row-major weights.

    The container is an ``.npz`` archive whose arrays are stored
    little-endian; see ``load_params`` for the inverse.
    """
    payload = {
        "format_version": np.array([CHECKPOINT_VERSION], dtype="<i8"),
        "num_layers": np.array([len(params.specs)], dtype="<i8"),
    }
    for i, spec in enumerate(params.specs):
        payload[f"layer{i}_meta"] = np.array(
            [spec.kind, str(spec.in_dim), str(spec.out_dim), spec.activation]
        )
        payload[f"layer{i}_W"] = np.ascontiguousarray(params.W[i], dtype="<f8")
        payload[f"layer{i}_b"] = np.ascontiguousarray(params.b[i], dtype="<f8")
    np.savez(path, **payload)


def load_params(path) -> Params:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["format_version"][0])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        n_layers = int(data["num_layers"][0])
        specs, weights, biases = [], [], []
        for i in range(n_layers):
            kind, in_dim, out_dim, activation = data[f"layer{i}_meta"]
            specs.append(
                LayerSpec(str(kind), int(in_dim), int(out_dim), str(activation))
            )
            weights.append(data[f"layer{i}_W"].astype(np.float64))
            biases.append(data[f"layer{i}_b"].astype(np.float64))
    params = Params(specs, np.random.default_rng(0))
    params.load_weights((weights, biases))
    return params
