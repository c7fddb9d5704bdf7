"""Forecast metrics, per-horizon reporting, and the simple baselines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import init_linear, linear_backward, linear_forward
from .tensor import SeededRng, ShapeError
from .training import TrainingError

__all__ = ["MetricReport", "MetricError", "metrics", "horizon_table",
           "baseline_hl", "LinearForecaster", "baseline_linear", "baseline_1nn"]

REPORT_HORIZONS = (3, 6, 12)


class MetricError(ValueError):
    """All entries masked or otherwise undefined metrics."""


@dataclass
class MetricReport:
    """Per-step and averaged MAE/RMSE/MAPE. The averages are means of the
    per-step values, matching the benchmark-family reporting convention."""

    mae_per_step: np.ndarray
    rmse_per_step: np.ndarray
    mape_per_step: np.ndarray  # percent
    sample_count: int
    mask_zero: bool

    @property
    def horizons(self) -> int:
        return len(self.mae_per_step)

    def at_horizon(self, h: int):
        """1-indexed step: horizon 3 is the third predicted step."""
        return (float(self.mae_per_step[h - 1]),
                float(self.rmse_per_step[h - 1]),
                float(self.mape_per_step[h - 1]))

    @property
    def average(self):
        return (float(self.mae_per_step.mean()),
                float(self.rmse_per_step.mean()),
                float(self.mape_per_step.mean()))


def metrics(pred: np.ndarray, target: np.ndarray,
            mask_zero: bool = True) -> MetricReport:
    """pred/target: (..., t_future); the last axis is the horizon axis.

    MAPE averages |e|/|y| in percent; with mask_zero, zero targets are
    excluded (a fully masked step raises MetricError).
    """
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} vs target {target.shape}")
    h = pred.shape[-1]
    p = pred.reshape(-1, h).astype(np.float64)
    y = target.reshape(-1, h).astype(np.float64)
    err = p - y
    mae = np.abs(err).mean(axis=0)
    rmse = np.sqrt((err * err).mean(axis=0))
    mape = np.empty(h)
    for k in range(h):
        yk = y[:, k]
        ek = err[:, k]
        keep = (yk != 0) if mask_zero else np.ones_like(yk, dtype=bool)
        if not keep.any():
            raise MetricError(f"all targets masked at horizon {k + 1}")
        mape[k] = np.mean(np.abs(ek[keep]) / np.abs(yk[keep])) * 100.0
    return MetricReport(mae, rmse, mape, sample_count=p.shape[0],
                        mask_zero=mask_zero)


def horizon_table(reports: dict, param_counts: dict | None = None,
                  markdown: bool = False) -> str:
    """Render reports as CSV (or markdown) rows with per-horizon columns."""
    cols = []
    for h in REPORT_HORIZONS:
        cols += [f"mae_h{h}", f"rmse_h{h}", f"mape_h{h}"]
    cols += ["mae_avg", "rmse_avg", "mape_avg", "params"]
    rows = []
    for name, rep in reports.items():
        cells = []
        for h in REPORT_HORIZONS:
            if h <= rep.horizons:
                cells += [f"{v:.4f}" for v in rep.at_horizon(h)]
            else:
                cells += ["", "", ""]
        cells += [f"{v:.4f}" for v in rep.average]
        count = (param_counts or {}).get(name)
        cells.append(str(count) if count is not None else "")
        rows.append((name, cells))
    if markdown:
        out = ["| variant | " + " | ".join(cols) + " |",
               "|" + "---|" * (len(cols) + 1)]
        out += ["| " + name + " | " + " | ".join(c) + " |" for name, c in rows]
        return "\n".join(out) + "\n"
    out = ["variant," + ",".join(cols)]
    out += [name + "," + ",".join(c) for name, c in rows]
    return "\n".join(out) + "\n"


def metrics_per_step_csv(reports: dict) -> str:
    """Long-form CSV: one row per variant and horizon step."""
    lines = ["variant,horizon,mae,rmse,mape_pct"]
    for name, rep in reports.items():
        for k in range(rep.horizons):
            lines.append(f"{name},{k + 1},{rep.mae_per_step[k]:.6f},"
                         f"{rep.rmse_per_step[k]:.6f},{rep.mape_per_step[k]:.6f}")
    return "\n".join(lines) + "\n"


def baseline_hl(x_past: np.ndarray, t_future: int) -> np.ndarray:
    """Historical last: repeat the final observed value for every future step."""
    if x_past.shape[-1] < 1:
        raise ShapeError("empty history")
    last = x_past[..., -1:]
    return np.repeat(last, t_future, axis=-1)


class LinearForecaster:
    """One shared t_past -> t_future linear map applied per node."""

    def __init__(self, t_past: int, t_future: int, seed: int = 0,
                 dtype=np.float32):
        self.layer = init_linear(SeededRng(seed), t_past, t_future, dtype=dtype)
        self.t_past = t_past
        self.t_future = t_future

    def forward(self, x):
        return linear_forward(self.layer, x)

    def forward_backward(self, x, grad_fn):
        pred = linear_forward(self.layer, x)
        grad_pred, aux = grad_fn(pred)
        linear_backward(self.layer, x, grad_pred)
        return pred, aux

    def zero_grad(self):
        self.layer.zero_grad()

    def parameters(self):
        for name, p, g in self.layer.parameters():
            yield f"linear.{name}", p, g

    def get_state(self):
        return {name: p.copy() for name, p, _ in self.parameters()}

    def set_state(self, state):
        for name, p, _ in self.parameters():
            p[...] = state[name]

    def parameter_count(self):
        return self.t_past * self.t_future + self.t_future


def baseline_linear(train_set, val_set, t_past: int, t_future: int,
                    loss_kind: str = "mae", max_epochs: int = 100,
                    batch_size: int = 32, lr: float = 1e-3,
                    patience: int = 7, seed: int = 0,
                    standardizer=None) -> LinearForecaster:
    """Fit the shared-weight linear baseline with the standard training loop."""
    from .training import fit  # local import to avoid a cycle at module load

    model = LinearForecaster(t_past, t_future, seed=seed)
    fit(model, train_set, val_set, loss_kind=loss_kind, max_epochs=max_epochs,
        batch_size=batch_size, lr=lr, patience=patience, shuffle_seed=seed,
        standardizer=standardizer)
    return model


def _znorm(a: np.ndarray) -> np.ndarray:
    mu = a.mean(axis=-1, keepdims=True)
    sd = a.std(axis=-1, keepdims=True)
    return (a - mu) / np.maximum(sd, 1e-8)


def baseline_1nn(train_values: np.ndarray, x_past: np.ndarray,
                 t_future: int) -> np.ndarray:
    """Per node, return the continuation of the training subsequence nearest
    to the query under z-normalized Euclidean distance (brute force).

    train_values: (n, t) training split, raw scale.
    x_past: (B, n, t_past) queries. Returns (B, n, t_future).
    """
    if x_past.ndim != 3:
        raise ShapeError(f"x_past must be (B, n, t_past), got {x_past.shape}")
    B, n, t_past = x_past.shape
    t = train_values.shape[-1]
    n_cand = t - t_past - t_future + 1
    if n_cand < 1:
        raise TrainingError(f"training split length {t} too short for "
                            f"t_past+t_future = {t_past + t_future}")
    out = np.empty((B, n, t_future), dtype=train_values.dtype)
    for j in range(n):
        subs = np.lib.stride_tricks.sliding_window_view(
            train_values[j], t_past)[:n_cand]
        zsubs = _znorm(subs.astype(np.float64))
        zq = _znorm(x_past[:, j, :].astype(np.float64))
        # squared distances via the inner-product expansion
        d2 = (np.sum(zq * zq, axis=1)[:, None]
              + np.sum(zsubs * zsubs, axis=1)[None, :]
              - 2.0 * zq @ zsubs.T)
        best = np.argmin(d2, axis=1)
        for bi, off in enumerate(best):
            out[bi, j] = train_values[j, off + t_past:off + t_past + t_future]
    return out
