"""Fully connected feedforward binary classifier trained with Adam.

Architecture: 768 -> hidden (2 or 3 layers, Tanh or ReLU) -> 1 sigmoid
unit.  Loss is mean binary cross-entropy plus an L2 penalty on the
weights (biases excluded).  Training uses minibatch Adam with early
stopping on a held-out validation split.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .svm import Scaler, TrainingError

MODEL_FORMAT_VERSION = 1

LR_GRID = (1e-1, 1e-2, 1e-3, 1e-4)
HIDDEN_LAYER_GRID = (2, 3)
HIDDEN_UNIT_GRID = (32, 64, 128)
ACTIVATIONS = ("tanh", "relu")


@dataclass(frozen=True)
class FfnConfig:
    hidden_layers: int = 2
    hidden_units: int = 64
    activation: str = "tanh"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    l2: float = 1e-4
    max_epochs: int = 200
    batch_size: int = 32
    patience: int = 20
    min_delta: float = 1e-4   # improvement below this does not reset patience
    bce_stop: float = 1e-3    # stop once validation BCE (penalty excluded) is this low
    seed: int = 0

    def __post_init__(self):
        if self.hidden_layers not in HIDDEN_LAYER_GRID:
            raise ValueError(f"hidden_layers must be in {HIDDEN_LAYER_GRID}")
        if not 32 <= self.hidden_units <= 128:
            raise ValueError("hidden_units must lie in [32, 128]")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")


@dataclass
class FfnModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str
    scaler: Scaler | None = None
    config: FfnConfig | None = None

    @property
    def kind(self) -> str:
        return "ffn"

    def copy_params(self):
        return [w.copy() for w in self.weights], [b.copy() for b in self.biases]


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    return np.tanh(z) if kind == "tanh" else np.maximum(z, 0.0)


def _act_grad(a: np.ndarray, z: np.ndarray, kind: str) -> np.ndarray:
    return 1.0 - a * a if kind == "tanh" else (z > 0.0).astype(np.float64)


def init_ffn(config: FfnConfig, input_dim: int = 768) -> FfnModel:
    """Glorot-uniform weights, zero biases, seeded."""
    rng = np.random.default_rng(config.seed)
    sizes = [input_dim] + [config.hidden_units] * config.hidden_layers + [1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return FfnModel(weights=weights, biases=biases,
                    activation=config.activation, config=config)


def _forward_all(model: FfnModel, X: np.ndarray):
    """Returns (activations per layer, pre-activations per layer, probs)."""
    acts = [X]
    zs = []
    a = X
    last = len(model.weights) - 1
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ W + b
        zs.append(z)
        a = z if i == last else _act(z, model.activation)
        acts.append(a)
    p = 1.0 / (1.0 + np.exp(-np.clip(acts[-1][:, 0], -500, 500)))
    return acts, zs, p


def forward(model: FfnModel, X) -> np.ndarray:
    """Class-1 probability; applies the model's scaler when present."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.weights[0].shape[0]:
        raise ValueError(
            f"dimension mismatch: model expects {model.weights[0].shape[0]}, "
            f"got {X.shape[1]}"
        )
    if model.scaler is not None:
        X = model.scaler.transform(X)
    return _forward_all(model, X)[2]


def predict_proba(model: FfnModel, X) -> np.ndarray:
    return forward(model, X)


def predict(model: FfnModel, X) -> np.ndarray:
    return (forward(model, X) >= 0.5).astype(np.int64)


def loss(model: FfnModel, X: np.ndarray, y: np.ndarray, l2: float) -> float:
    """Mean BCE plus l2 * sum of squared weights (biases unpenalized).

    Operates in the model's parameter space; X must already be scaled.
    """
    if len(X) == 0:
        raise ValueError("empty batch")
    _, _, p = _forward_all(model, X)
    eps = 1e-12
    bce = -np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps))
    penalty = l2 * sum(float(np.sum(W * W)) for W in model.weights)
    return float(bce + penalty)


def backward(model: FfnModel, X: np.ndarray, y: np.ndarray, l2: float):
    """Analytic gradients of `loss` w.r.t. all weights and biases."""
    if len(X) == 0:
        raise ValueError("empty batch")
    n = len(X)
    acts, zs, p = _forward_all(model, X)
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.biases)
    delta = ((p - y) / n)[:, None]          # dL/dz at the output unit
    for i in range(len(model.weights) - 1, -1, -1):
        grads_w[i] = acts[i].T @ delta + 2.0 * l2 * model.weights[i]
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * _act_grad(
                acts[i], zs[i - 1], model.activation)
    return grads_w, grads_b


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params])


def adam_step(params, grads, state: AdamState, t: int, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One Adam update with bias correction; t counts from 1."""
    if t < 1:
        raise ValueError("Adam step index starts at 1")
    new_params = []
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = beta1 * state.m[i] + (1 - beta1) * g
        state.v[i] = beta2 * state.v[i] + (1 - beta2) * g * g
        m_hat = state.m[i] / (1 - beta1 ** t)
        v_hat = state.v[i] / (1 - beta2 ** t)
        new_params.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
    return new_params, state


def train_ffn(features, config: FfnConfig):
    """Train on a FeatureMatrix (or (X, y)); returns (model, log).

    Early stopping on a 10% stratified validation split; the parameters
    with the best validation loss are restored.  The log lists per-epoch
    train/validation losses.
    """
    if hasattr(features, "X"):
        X, y = features.X, features.y
    else:
        X, y = features
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(X) == 0:
        raise TrainingError("empty training input")
    if len(np.unique(y)) < 2:
        raise TrainingError("single-class training input")

    scaler = Scaler.fit(X)
    Xs = scaler.transform(X)

    rng = np.random.default_rng(config.seed)
    val_idx = _stratified_holdout(y, 0.1, rng)
    train_mask = np.ones(len(y), dtype=bool)
    train_mask[val_idx] = False
    Xt, yt = Xs[train_mask], y[train_mask]
    Xv, yv = Xs[val_idx], y[val_idx]
    if len(Xv) == 0:                       # tiny datasets: validate on train
        Xv, yv = Xt, yt

    model = init_ffn(config, input_dim=X.shape[1])
    params = model.weights + model.biases
    state = AdamState.zeros_like(params)
    n_w = len(model.weights)

    best_val = math.inf
    best_params = model.copy_params()
    best_epoch = 0
    log = []
    t = 0
    n = len(Xt)
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            gw, gb = backward(model, Xt[idx], yt[idx], config.l2)
            t += 1
            params, state = adam_step(
                params, gw + gb, state, t, config.learning_rate,
                config.beta1, config.beta2)
            model.weights = params[:n_w]
            model.biases = params[n_w:]
        train_loss = loss(model, Xt, yt, config.l2)
        val_loss = loss(model, Xv, yv, config.l2)
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            raise TrainingError(
                f"non-finite loss at epoch {epoch} "
                f"(lr={config.learning_rate}, activation={config.activation})"
            )
        log.append({"epoch": epoch, "train_loss": train_loss,
                    "val_loss": val_loss})
        if val_loss < best_val:
            best_params = model.copy_params()
        if val_loss < best_val - config.min_delta:
            best_epoch = epoch
        if val_loss < best_val:
            best_val = val_loss
        if epoch - best_epoch >= config.patience:
            break
        penalty = config.l2 * sum(float(np.sum(W * W)) for W in model.weights)
        if val_loss - penalty < config.bce_stop:
            break

    model.weights, model.biases = best_params
    model.scaler = scaler
    return model, log


def _stratified_holdout(y: np.ndarray, frac: float, rng) -> np.ndarray:
    """Indices of a stratified validation split (may be empty per class)."""
    idx = []
    for cls in np.unique(y):
        cls_idx = np.flatnonzero(y == cls)
        k = int(round(frac * len(cls_idx)))
        if k > 0:
            idx.extend(rng.permutation(cls_idx)[:k])
    return np.array(sorted(int(i) for i in idx), dtype=np.int64)


def save_ffn(model: FfnModel, path) -> None:
    cfg = model.config
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": "ffn",
        "activation": model.activation,
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "scaler_mean": model.scaler.mean.tolist() if model.scaler else None,
        "scaler_std": model.scaler.std.tolist() if model.scaler else None,
        "config": {
            "hidden_layers": cfg.hidden_layers,
            "hidden_units": cfg.hidden_units,
            "activation": cfg.activation,
            "learning_rate": cfg.learning_rate,
            "l2": cfg.l2,
            "seed": cfg.seed,
        } if cfg else None,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def load_ffn(path) -> FfnModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("kind") != "ffn":
        raise ValueError(f"{path} is not an ffn model file")
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format {doc.get('format_version')!r}")
    scaler = None
    if doc["scaler_mean"] is not None:
        scaler = Scaler(mean=np.array(doc["scaler_mean"]),
                        std=np.array(doc["scaler_std"]))
    cfg = None
    if doc.get("config"):
        cfg = FfnConfig(**doc["config"])
    return FfnModel(
        weights=[np.array(w, dtype=np.float64) for w in doc["weights"]],
        biases=[np.array(b, dtype=np.float64) for b in doc["biases"]],
        activation=doc["activation"],
        scaler=scaler,
        config=cfg,
    )
