"""Figure rendering for the report paths (written next to the CSV outputs)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["plot_history", "plot_per_step_metrics", "plot_corr_error",
           "plot_jl_distortion"]


def plot_history(history, path):
    epochs = [row["epoch"] for row in history.epochs]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, [row["train_loss"] for row in history.epochs],
            label="train loss", marker="o", ms=3)
    ax.plot(epochs, [row["val_mae"] for row in history.epochs],
            label="val MAE", marker="s", ms=3)
    if history.best_epoch > 0:
        ax.axvline(history.best_epoch, color="gray", ls="--", lw=1,
                   label=f"best epoch ({history.best_epoch})")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss / MAE")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_per_step_metrics(reports: dict, path, metric: str = "mae"):
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, rep in reports.items():
        values = getattr(rep, f"{metric}_per_step")
        ax.plot(np.arange(1, len(values) + 1), values, marker="o", ms=3,
                label=name)
    ax.set_xlabel("horizon step")
    ax.set_ylabel(metric.upper())
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_corr_error(points, path, metric: str = "mae"):
    xs = [p.pearson for p in points if p.defined]
    ys = [getattr(p, f"{metric}_pair") for p in points if p.defined]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(xs, ys, s=18, alpha=0.8)
    ax.set_xlabel("pairwise output correlation (Pearson r)")
    ax.set_ylabel(f"mean pair {metric.upper()}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_jl_distortion(reports, path):
    """reports: dict label -> JLReport; one box per projection width."""
    labels = list(reports)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.boxplot([reports[k].distortions for k in labels], tick_labels=labels)
    ax.axhline(1.0, color="gray", ls="--", lw=1)
    ax.set_xlabel("projection width")
    ax.set_ylabel("distance distortion")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
