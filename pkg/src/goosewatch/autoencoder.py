"""Fully connected autoencoder with explicit forward and backward passes.

Two reference architectures are used by the detection pipeline: a deeper
net for the sequence view and a deliberately narrow bottleneck for the
temporal view, so volumetric flooding cannot be reconstructed. Hidden
layers are tanh, the output layer is linear, and training minimizes mean
squared reconstruction error with per-parameter adaptive (Adam) updates.
Everything is seeded and single-threaded: a fixed configuration always
reproduces the same weights, byte for byte.

Reconstruction errors are computed in standardized space so that features
with different units contribute comparably.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

DEFAULT_DIMS = {
    "seq": (6, 16, 8, 3, 8, 16, 6),
    "temp": (8, 8, 2, 8, 8),
}

STD_FLOOR = 1e-8
DEGENERATE_VARIANCE = 1e-12

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class EmptyInput(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class Diverged(RuntimeError):
    """Training loss became NaN/Inf; lower the learning rate."""


# ---------------------------------------------------------------------------
# Standardization
# ---------------------------------------------------------------------------


@dataclass
class Scaler:
    """Per-column z-scoring; degenerate (near-constant) columns keep their
    mean but divide by 1 so they map to exactly zero."""

    mean: np.ndarray
    scale: np.ndarray
    degenerate: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def inverse(self, Xs: np.ndarray) -> np.ndarray:
        return np.asarray(Xs, dtype=float) * self.scale + self.mean

    def to_dict(self) -> dict:
        return {
            "means": self.mean.tolist(),
            "stds": self.scale.tolist(),
            "degenerate": [bool(d) for d in self.degenerate],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        return cls(
            mean=np.array(d["means"], dtype=float),
            scale=np.array(d["stds"], dtype=float),
            degenerate=np.array(d["degenerate"], dtype=bool),
        )


def fit_scaler(X: np.ndarray) -> Scaler:
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        raise EmptyInput("cannot fit a scaler on an empty matrix")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    degenerate = std**2 < DEGENERATE_VARIANCE
    scale = np.where(degenerate, 1.0, np.maximum(std, STD_FLOOR))
    return Scaler(mean=mean, scale=scale, degenerate=degenerate)


# ---------------------------------------------------------------------------
# Network
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    dims: tuple[int, ...]
    lr: float = 1e-3
    epochs: int = 500
    batch: int = 64
    seed: int = 0
    val_frac: float = 0.1
    patience: int = 20


def init_params(dims, rng) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Symmetric uniform init in +-sqrt(6/(fan_in+fan_out))."""
    weights, biases = [], []
    for fan_in, fan_out in zip(dims, dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def forward_pass(weights, biases, Xs: np.ndarray) -> list[np.ndarray]:
    """Return activations per layer, input first, reconstruction last."""
    acts = [Xs]
    last = len(weights) - 1
    a = Xs
    for i, (W, b) in enumerate(zip(weights, biases)):
        z = a @ W + b
        a = z if i == last else np.tanh(z)
        acts.append(a)
    return acts


def loss_and_grads(weights, biases, Xs: np.ndarray):
    """MSE reconstruction loss (mean over rows and columns) and its
    gradients with respect to every weight and bias."""
    acts = forward_pass(weights, biases, Xs)
    xhat = acts[-1]
    diff = xhat - Xs
    n, d = Xs.shape
    loss = float(np.mean(diff**2))
    delta = (2.0 / (n * d)) * diff
    dW = [np.empty_like(W) for W in weights]
    db = [np.empty_like(b) for b in biases]
    for i in range(len(weights) - 1, -1, -1):
        dW[i] = acts[i].T @ delta
        db[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ weights[i].T) * (1.0 - acts[i] ** 2)
    return loss, dW, db


def mse_rows(Xs: np.ndarray, xhat: np.ndarray) -> np.ndarray:
    return np.mean((Xs - xhat) ** 2, axis=1)


@dataclass
class AeModel:
    """A trained view model: scaler + layer weights; immutable after fit."""

    view: str
    dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    scaler: Scaler
    train_meta: dict = field(default_factory=dict)
    activation: str = "tanh"

    @property
    def bottleneck(self) -> int:
        return len(self.dims) // 2

    def n_params(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def forward(self, x: np.ndarray):
        """Forward one vector or a batch of rows (scaled space).

        Returns (xhat, z, activations).
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = x[None, :] if single else x
        if X.shape[1] != self.dims[0]:
            raise DimensionMismatch(
                f"{self.view}: expected {self.dims[0]} columns, got {X.shape[1]}"
            )
        acts = forward_pass(self.weights, self.biases, X)
        xhat, z = acts[-1], acts[self.bottleneck]
        if single:
            return xhat[0], z[0], acts
        return xhat, z, acts

    def reconstruction_errors(self, X_raw: np.ndarray) -> np.ndarray:
        """Per-row MSE in scaled space."""
        Xs = self.scaler.transform(np.atleast_2d(X_raw))
        xhat, _, _ = self.forward(Xs)
        return mse_rows(Xs, xhat)

    def latent(self, X_raw: np.ndarray) -> np.ndarray:
        Xs = self.scaler.transform(np.atleast_2d(X_raw))
        _, z, _ = self.forward(Xs)
        return z

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "view": self.view,
            "dims": list(self.dims),
            "activation": self.activation,
            "scaler": self.scaler.to_dict(),
            "weights": [
                {"W": W.tolist(), "b": b.tolist()}
                for W, b in zip(self.weights, self.biases)
            ],
            "train_meta": self.train_meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AeModel":
        if d.get("version") != 1:
            raise ValueError(f"unsupported model version {d.get('version')!r}")
        return cls(
            view=d["view"],
            dims=tuple(d["dims"]),
            weights=[np.array(layer["W"], dtype=float) for layer in d["weights"]],
            biases=[np.array(layer["b"], dtype=float) for layer in d["weights"]],
            scaler=Scaler.from_dict(d["scaler"]),
            train_meta=d.get("train_meta", {}),
            activation=d.get("activation", "tanh"),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "AeModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def train(X_raw: np.ndarray, view: str, config: TrainConfig) -> AeModel:
    """Fit scaler and weights on normal-traffic rows only (labels are never
    consulted here; the CLI guards training purity upstream)."""
    X_raw = np.asarray(X_raw, dtype=float)
    if X_raw.ndim != 2 or X_raw.shape[0] == 0:
        raise EmptyInput("training matrix is empty")
    dims = tuple(config.dims)
    if X_raw.shape[1] != dims[0] or dims[0] != dims[-1]:
        raise DimensionMismatch(
            f"dims {dims} incompatible with {X_raw.shape[1]} input columns"
        )

    scaler = fit_scaler(X_raw)
    Xs = scaler.transform(X_raw)
    n = Xs.shape[0]

    rng = np.random.default_rng(config.seed)
    weights, biases = init_params(dims, rng)
    n_params = sum(W.size + b.size for W, b in zip(weights, biases))
    if n < n_params:
        warnings.warn(
            f"{view}: {n} training rows for {n_params} parameters; "
            "expect an unstable fit",
            stacklevel=2,
        )

    perm = rng.permutation(n)
    n_val = int(round(n * config.val_frac)) if n > 1 else 0
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    if train_idx.size == 0:
        train_idx = perm
    monitor_idx = val_idx if val_idx.size else train_idx

    m_w = [np.zeros_like(W) for W in weights]
    v_w = [np.zeros_like(W) for W in weights]
    m_b = [np.zeros_like(b) for b in biases]
    v_b = [np.zeros_like(b) for b in biases]
    step = 0

    def adam_update(params, grads, m, v):
        for p, g, mi, vi in zip(params, grads, m, v):
            mi *= ADAM_BETA1
            mi += (1 - ADAM_BETA1) * g
            vi *= ADAM_BETA2
            vi += (1 - ADAM_BETA2) * g**2
            m_hat = mi / (1 - ADAM_BETA1**step)
            v_hat = vi / (1 - ADAM_BETA2**step)
            p -= config.lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)

    best_val = np.inf
    bad_epochs = 0
    epochs_run = 0
    train_loss = np.nan
    for epoch in range(1, config.epochs + 1):
        order = train_idx[rng.permutation(train_idx.size)]
        for ofs in range(0, order.size, config.batch):
            batch = Xs[order[ofs : ofs + config.batch]]
            step += 1
            _, dW, db = loss_and_grads(weights, biases, batch)
            adam_update(weights, dW, m_w, v_w)
            adam_update(biases, db, m_b, v_b)

        acts = forward_pass(weights, biases, Xs)
        errs = mse_rows(Xs, acts[-1])
        train_loss = float(errs[train_idx].mean())
        val_loss = float(errs[monitor_idx].mean())
        epochs_run = epoch
        if not np.isfinite(train_loss) or not np.isfinite(val_loss):
            raise Diverged(f"{view}: loss became {train_loss} at epoch {epoch}")
        if val_loss < best_val:
            best_val = val_loss
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                break

    return AeModel(
        view=view,
        dims=dims,
        weights=weights,
        biases=biases,
        scaler=scaler,
        train_meta={
            "seed": config.seed,
            "learning_rate": config.lr,
            "batch": config.batch,
            "epochs": config.epochs,
            "epochs_run": epochs_run,
            "val_frac": config.val_frac,
            "patience": config.patience,
            "final_loss": train_loss,
            "best_val_loss": best_val,
            "n_rows": n,
        },
    )
