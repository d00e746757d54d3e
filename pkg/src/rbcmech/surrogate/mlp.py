"""Feed-forward surrogate: three tanh hidden layers of 32 units, trained
with Adam on normalized mean-squared error and early stopping."""

import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ExtrapolationWarning, RbcmechError
from .table import TrainingTable

logger = logging.getLogger(__name__)

HIDDEN = (32, 32, 32)

# Output channels spanning decades (relaxation times) are regressed in log
# space; the transform is recorded in the model and inverted on prediction.
LOG_OUTPUT_NAMES = ("t_c_ms",)

DEFAULT_LEARNING_RATE = 1e-3
DEFAULT_BATCH = 128
DEFAULT_PATIENCE = 50
DEFAULT_MAX_EPOCHS = 2000
MIN_TRAINING_ROWS = 500


@dataclass
class SurrogateModel:
    """Weights plus normalization metadata; immutable after training."""

    input_names: Tuple[str, ...]
    output_names: Tuple[str, ...]
    layer_sizes: Tuple[int, ...]
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: np.ndarray
    y_std: np.ndarray
    log_output: np.ndarray          # bool per output channel
    input_low: np.ndarray           # training-domain bounds per input
    input_high: np.ndarray
    epochs_trained: int = 0
    best_val_loss: float = np.inf

    def to_json(self) -> str:
        doc = {
            "input_names": list(self.input_names),
            "output_names": list(self.output_names),
            "layer_sizes": list(self.layer_sizes),
            "activation": "tanh",
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "x_mean": self.x_mean.tolist(),
            "x_std": self.x_std.tolist(),
            "y_mean": self.y_mean.tolist(),
            "y_std": self.y_std.tolist(),
            "log_output": self.log_output.astype(int).tolist(),
            "input_low": self.input_low.tolist(),
            "input_high": self.input_high.tolist(),
            "epochs_trained": self.epochs_trained,
            "best_val_loss": self.best_val_loss,
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SurrogateModel":
        doc = json.loads(text)
        sizes = tuple(doc["layer_sizes"])
        weights = []
        for k, flat in enumerate(doc["weights"]):
            weights.append(np.array(flat, dtype=float).reshape(sizes[k + 1], sizes[k]))
        return cls(
            input_names=tuple(doc["input_names"]),
            output_names=tuple(doc["output_names"]),
            layer_sizes=sizes,
            weights=weights,
            biases=[np.array(b, dtype=float) for b in doc["biases"]],
            x_mean=np.array(doc["x_mean"]), x_std=np.array(doc["x_std"]),
            y_mean=np.array(doc["y_mean"]), y_std=np.array(doc["y_std"]),
            log_output=np.array(doc["log_output"], dtype=bool),
            input_low=np.array(doc["input_low"]),
            input_high=np.array(doc["input_high"]),
            epochs_trained=doc.get("epochs_trained", 0),
            best_val_loss=doc.get("best_val_loss", np.inf),
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "SurrogateModel":
        return cls.from_json(Path(path).read_text())


def _init_layers(sizes: Sequence[int], rng: np.random.Generator):
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def _forward(weights, biases, x):
    """x: (n, n_in) normalized; returns activations per layer."""
    acts = [x]
    h = x
    n_layers = len(weights)
    for k, (w, b) in enumerate(zip(weights, biases)):
        z = h @ w.T + b
        h = np.tanh(z) if k < n_layers - 1 else z
        acts.append(h)
    return acts


def _backward(weights, acts, residual):
    """Gradients of mean-over-all-entries squared error."""
    n = acts[0].shape[0]
    grads_w = [None] * len(weights)
    grads_b = [None] * len(weights)
    delta = 2.0 * residual / (n * residual.shape[1])
    for k in range(len(weights) - 1, -1, -1):
        grads_w[k] = delta.T @ acts[k]
        grads_b[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ weights[k]) * (1.0 - acts[k] ** 2)
    return grads_w, grads_b


def train_val_split(table: TrainingTable, split_seed: int = 0):
    """Deterministic 80/20 row split of the usable rows (indices)."""
    n = int(table.ok.sum())
    rng = np.random.default_rng(split_seed)
    perm = rng.permutation(n)
    n_train = int(round(0.8 * n))
    return perm[:n_train], perm[n_train:]


def subset_table(table: TrainingTable, idx) -> TrainingTable:
    """New table holding the given usable-row indices."""
    x, y = table.usable()
    return TrainingTable(
        kind=table.kind, columns=table.columns, inputs=x[idx],
        output_names=table.output_names, outputs=y[idx],
        ok=np.ones(len(idx), dtype=bool), mesh_level=table.mesh_level,
        seed=table.seed, bounds=table.bounds,
    )


def train_mlp(table: TrainingTable, split_seed: int = 0,
              learning_rate: float = DEFAULT_LEARNING_RATE,
              batch_size: int = DEFAULT_BATCH,
              patience: int = DEFAULT_PATIENCE,
              max_epochs: int = DEFAULT_MAX_EPOCHS,
              min_rows: int = MIN_TRAINING_ROWS) -> SurrogateModel:
    """Train the regressor on the table's successful rows.

    80% training / 20% validation split (seeded shuffle), minimizing the MSE
    of normalized outputs with Adam; early stopping restores the weights of
    the best validation epoch.  Raises on NaN loss with the last stable
    state recorded in the message.
    """
    x_all, y_all = table.usable()
    if x_all.shape[0] < min_rows:
        raise RbcmechError(f"need >= {min_rows} usable rows, have {x_all.shape[0]}")
    n = x_all.shape[0]
    rng = np.random.default_rng(split_seed)
    train_idx, val_idx = train_val_split(table, split_seed)
    rng = np.random.default_rng(split_seed)
    rng.permutation(n)  # keep the weight-init stream aligned with the split draw
    n_train = train_idx.size

    log_output = np.array([name in LOG_OUTPUT_NAMES for name in table.output_names])
    y_t = y_all.copy()
    if np.any(log_output):
        if np.any(y_t[:, log_output] <= 0.0):
            raise RbcmechError("non-positive values in a log-transformed channel")
        y_t[:, log_output] = np.log(y_t[:, log_output])

    x_mean = x_all[train_idx].mean(axis=0)
    x_std = x_all[train_idx].std(axis=0)
    x_std[x_std < 1e-12] = 1.0
    y_mean = y_t[train_idx].mean(axis=0)
    y_std = y_t[train_idx].std(axis=0)
    y_std[y_std < 1e-12] = 1.0

    xn = (x_all - x_mean) / x_std
    yn = (y_t - y_mean) / y_std
    x_train, y_train = xn[train_idx], yn[train_idx]
    x_val, y_val = xn[val_idx], yn[val_idx]

    sizes = (x_all.shape[1], *HIDDEN, y_all.shape[1])
    weights, biases = _init_layers(sizes, rng)

    # Adam state
    m_w = [np.zeros_like(w) for w in weights]
    v_w = [np.zeros_like(w) for w in weights]
    m_b = [np.zeros_like(b) for b in biases]
    v_b = [np.zeros_like(b) for b in biases]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    best_val = np.inf
    best = ([w.copy() for w in weights], [b.copy() for b in biases])
    best_epoch = 0
    epoch = 0
    for epoch in range(1, max_epochs + 1):
        order = rng.permutation(n_train)
        for lo in range(0, n_train, batch_size):
            idx = order[lo : lo + batch_size]
            acts = _forward(weights, biases, x_train[idx])
            residual = acts[-1] - y_train[idx]
            grads_w, grads_b = _backward(weights, acts, residual)
            step += 1
            corr1 = 1.0 - beta1**step
            corr2 = 1.0 - beta2**step
            for k in range(len(weights)):
                m_w[k] = beta1 * m_w[k] + (1 - beta1) * grads_w[k]
                v_w[k] = beta2 * v_w[k] + (1 - beta2) * grads_w[k] ** 2
                weights[k] -= learning_rate * (m_w[k] / corr1) / (
                    np.sqrt(v_w[k] / corr2) + eps)
                m_b[k] = beta1 * m_b[k] + (1 - beta1) * grads_b[k]
                v_b[k] = beta2 * v_b[k] + (1 - beta2) * grads_b[k] ** 2
                biases[k] -= learning_rate * (m_b[k] / corr1) / (
                    np.sqrt(v_b[k] / corr2) + eps)

        val_pred = _forward(weights, biases, x_val)[-1]
        val_loss = float(np.mean((val_pred - y_val) ** 2))
        if not np.isfinite(val_loss):
            raise RbcmechError(
                f"training diverged at epoch {epoch}; best checkpoint was epoch "
                f"{best_epoch} (val loss {best_val:.4g})"
            )
        if val_loss < best_val - 1e-12:
            best_val = val_loss
            best = ([w.copy() for w in weights], [b.copy() for b in biases])
            best_epoch = epoch
        elif epoch - best_epoch >= patience:
            break

    logger.info("training stopped at epoch %d (best %d, val loss %.4g)",
                epoch, best_epoch, best_val)
    if table.bounds:
        input_low = np.array([table.bounds[c][0] for c in table.columns])
        input_high = np.array([table.bounds[c][1] for c in table.columns])
    else:
        input_low = x_all.min(axis=0)
        input_high = x_all.max(axis=0)
    return SurrogateModel(
        input_names=tuple(table.columns),
        output_names=tuple(table.output_names),
        layer_sizes=sizes,
        weights=best[0], biases=best[1],
        x_mean=x_mean, x_std=x_std, y_mean=y_mean, y_std=y_std,
        log_output=log_output,
        input_low=input_low, input_high=input_high,
        epochs_trained=best_epoch, best_val_loss=best_val,
    )


def surrogate_predict(model: SurrogateModel, x: np.ndarray,
                      warn_extrapolation: bool = True):
    """Denormalized predictions for rows x; flags out-of-domain inputs.

    Returns (y, extrapolated) where ``extrapolated`` marks rows outside the
    training bounds (a warning is emitted unless suppressed).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != len(model.input_names):
        raise ValueError(
            f"expected {len(model.input_names)} inputs, got {x.shape[1]}")
    extrapolated = np.any((x < model.input_low) | (x > model.input_high), axis=1)
    if warn_extrapolation and np.any(extrapolated):
        warnings.warn(
            f"{int(extrapolated.sum())} input row(s) outside training bounds",
            ExtrapolationWarning, stacklevel=2,
        )
    xn = (x - model.x_mean) / model.x_std
    yn = _forward(model.weights, model.biases, xn)[-1]
    y = yn * model.y_std + model.y_mean
    if np.any(model.log_output):
        y[:, model.log_output] = np.exp(y[:, model.log_output])
    return y, extrapolated


def validate_surrogate(model: SurrogateModel, table: TrainingTable) -> dict:
    """Holdout accuracy: per-output RMSE, relative RMSE and worst row.

    Relative RMSE is per-point, sqrt(mean(((pred - true) / true)^2)); all
    observables are positive quantities.
    """
    x, y = table.usable()
    pred, _ = surrogate_predict(model, x, warn_extrapolation=False)
    err = pred - y
    rmse = np.sqrt(np.mean(err**2, axis=0))
    rel = err / y
    rel_rmse = np.sqrt(np.mean(rel**2, axis=0))
    worst_row = int(np.argmax(np.max(np.abs(rel), axis=1)))
    return {
        "output_names": list(model.output_names),
        "rmse": rmse.tolist(),
        "relative_rmse": rel_rmse.tolist(),
        "worst_abs_relative_error": float(np.max(np.abs(rel))),
        "worst_row": worst_row,
        "n_rows": int(x.shape[0]),
    }
