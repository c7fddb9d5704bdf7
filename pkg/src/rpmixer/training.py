"""Losses, the AdamW optimizer, z-score standardization, and the fit loop."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .tensor import SeededRng, ShapeError

__all__ = ["mae_loss", "mse_loss", "AdamW", "EarlyStopper", "Standardizer",
           "fit", "TrainingError"]


class TrainingError(RuntimeError):
    """Raised when training cannot proceed (empty data, non-finite loss)."""


def _check_same_shape(pred, target):
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} vs target {target.shape}")


def mae_loss(pred: np.ndarray, target: np.ndarray):
    """Mean absolute error and its gradient w.r.t. pred (0 at exact ties)."""
    _check_same_shape(pred, target)
    diff = pred - target
    loss = float(np.mean(np.abs(diff)))
    grad = np.sign(diff) / diff.size
    return loss, grad.astype(pred.dtype)


def mse_loss(pred: np.ndarray, target: np.ndarray):
    """Mean squared error and its gradient w.r.t. pred."""
    _check_same_shape(pred, target)
    diff = pred - target
    loss = float(np.mean(diff * diff))
    grad = 2.0 * diff / diff.size
    return loss, grad.astype(pred.dtype)


LOSSES = {"mae": mae_loss, "mse": mse_loss}


class AdamW:
    """Adam with decoupled weight decay.

    Update: m <- b1 m + (1-b1) g ; v <- b2 v + (1-b2) g^2 ;
    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * theta.
    Only parameters exposed by model.parameters() are touched, so frozen
    projection weights are never updated.
    """

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8,
                 weight_decay=0.01):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, named_params):
        """named_params: iterable of (name, value, grad) triples."""
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p, g in named_params:
            if g.shape != p.shape:
                raise ShapeError(f"{name}: grad {g.shape} != param {p.shape}")
            if name not in self.m:
                self.m[name] = np.zeros_like(p, dtype=np.float64)
                self.v[name] = np.zeros_like(p, dtype=np.float64)
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g, dtype=np.float64)
            update = self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p -= (update + self.lr * self.weight_decay * p).astype(p.dtype)


class EarlyStopper:
    """Tracks the best validation metric; stops after `patience` stale epochs."""

    def __init__(self, patience: int = 7):
        self.patience = patience
        self.best_metric = np.inf
        self.best_state = None
        self.best_epoch = -1
        self.epochs_since_improvement = 0

    def update(self, metric: float, state, epoch: int) -> bool:
        """Record an epoch result; returns True when training should stop."""
        if metric < self.best_metric:
            self.best_metric = metric
            self.best_state = state
            self.best_epoch = epoch
            self.epochs_since_improvement = 0
        else:
            self.epochs_since_improvement += 1
        return self.epochs_since_improvement >= self.patience


class Standardizer:
    """Per node-feature z-score, fit on the training split only."""

    def __init__(self, mean: np.ndarray, std: np.ndarray):
        self.mean = mean
        self.std = std

    @classmethod
    def fit(cls, train_values: np.ndarray) -> "Standardizer":
        """train_values: (n, d, t) training-split series."""
        if train_values.shape[-1] == 0:
            raise ValueError("cannot standardize a zero-length series")
        mean = train_values.mean(axis=-1, keepdims=True)
        std = train_values.std(axis=-1, keepdims=True)
        std = np.maximum(std, 1e-8)
        return cls(mean, std)

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.std

    def inverse_transform(self, values: np.ndarray) -> np.ndarray:
        return values * self.std + self.mean

    def inverse_transform_target(self, pred: np.ndarray) -> np.ndarray:
        """De-standardize forecasts of feature 0: pred shaped (..., n, t_future)."""
        mean0 = self.mean[:, 0, :]  # (n, 1) broadcasts over the horizon axis
        std0 = self.std[:, 0, :]
        return pred * std0 + mean0


@dataclass
class TrainHistory:
    epochs: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_mae: float = float("inf")

    def append(self, epoch, train_loss, val_mae, lr, seconds):
        self.epochs.append({"epoch": epoch, "train_loss": train_loss,
                            "val_mae": val_mae, "lr": lr, "seconds": seconds})

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,val_mae,lr,seconds"]
        for row in self.epochs:
            lines.append(f"{row['epoch']},{row['train_loss']:.8g},"
                         f"{row['val_mae']:.8g},{row['lr']:.8g},"
                         f"{row['seconds']:.3f}")
        return "\n".join(lines) + "\n"


def _validation_mae(model, x, y, standardizer, batch_size):
    total = 0.0
    count = 0
    for start in range(0, x.shape[0], batch_size):
        xb = x[start:start + batch_size]
        yb = y[start:start + batch_size]
        pred = model.forward(xb)
        if standardizer is not None:
            pred = standardizer.inverse_transform_target(pred)
            yb = standardizer.inverse_transform_target(yb)
        total += float(np.sum(np.abs(pred - yb)))
        count += pred.size
    return total / count


def fit(model, train_set, val_set, loss_kind: str = "mae",
        max_epochs: int = 100, batch_size: int = 32, lr: float = 1e-3,
        weight_decay: float = 0.01, patience: int = 7, shuffle_seed: int = 0,
        standardizer: Standardizer | None = None,
        log=None) -> TrainHistory:
    """Mini-batch training with early stopping on validation MAE.

    train_set / val_set are (X, Y) array pairs. The validation metric is MAE
    on de-standardized predictions when a standardizer is given. On stop the
    best checkpoint is restored into the model.
    """
    x_train, y_train = train_set
    x_val, y_val = val_set
    if x_train.shape[0] == 0 or x_val.shape[0] == 0:
        raise TrainingError("empty training or validation set")
    loss_fn = LOSSES[loss_kind]
    opt = AdamW(lr=lr, weight_decay=weight_decay)
    stopper = EarlyStopper(patience=patience)
    rng = SeededRng(shuffle_seed)
    history = TrainHistory()

    for epoch in range(1, max_epochs + 1):
        t0 = time.perf_counter()
        order = np.argsort(rng.uniform((x_train.shape[0],), dtype=np.float64),
                           kind="stable")
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            xb = x_train[idx]
            yb = y_train[idx]
            model.zero_grad()
            _, loss = model.forward_backward(
                xb, lambda pred: _loss_grad(loss_fn, pred, yb))
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch {n_batches}")
            opt.step(model.parameters())
            epoch_loss += loss
            n_batches += 1
        epoch_loss /= max(1, n_batches)
        val_mae = _validation_mae(model, x_val, y_val, standardizer, batch_size)
        history.append(epoch, epoch_loss, val_mae, lr,
                       time.perf_counter() - t0)
        if log is not None:
            log(f"epoch {epoch}: train_{loss_kind} {epoch_loss:.5f} "
                f"val_mae {val_mae:.5f}")
        if stopper.update(val_mae, model.get_state(), epoch):
            break
    if stopper.best_state is not None:
        model.set_state(stopper.best_state)
    history.best_epoch = stopper.best_epoch
    history.best_val_mae = stopper.best_metric
    return history


def _loss_grad(loss_fn, pred, target):
    loss, grad = loss_fn(pred, target)
    return grad, loss
