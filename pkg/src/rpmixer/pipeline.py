"""End-to-end experiment plumbing shared by the CLI subcommands."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ConfigError, ExperimentConfig
from .data import (RawSeries, SyntheticSpec, WindowedDataset, aggregate,
                   chronological_split, load_series, make_windows,
                   synthetic_generate)
from .evaluation import MetricReport, metrics
from .model import ModelConfig, RPMixerModel, build_model
from .training import Standardizer, fit

__all__ = ["PreparedData", "prepare_data", "evaluate_model", "train_model"]


@dataclass
class PreparedData:
    raw: RawSeries
    splits: tuple  # (train, val, test) RawSeries, raw scale
    windows: dict  # split name -> WindowedDataset (standardized scale)
    standardizer: Standardizer | None

    @property
    def n(self) -> int:
        return self.raw.n

    @property
    def d(self) -> int:
        return self.raw.d


def load_dataset(cfg: ExperimentConfig) -> RawSeries:
    if cfg.synthetic or not cfg.dataset:
        spec = SyntheticSpec(n=cfg.synthetic_n, steps=cfg.synthetic_steps,
                             noise_std=cfg.synthetic_noise_std, seed=cfg.seed)
        return synthetic_generate(spec)
    try:
        return load_series(cfg.dataset)
    except FileNotFoundError:
        raise ConfigError(f"dataset not found: {cfg.dataset}") from None


def prepare_data(cfg: ExperimentConfig, raw: RawSeries | None = None) -> PreparedData:
    if raw is None:
        raw = load_dataset(cfg)
    if cfg.aggregate_minutes:
        raw = aggregate(raw, cfg.aggregate_minutes)
    splits = chronological_split(raw)
    standardizer = Standardizer.fit(splits[0].values) if cfg.standardize else None
    windows = {}
    for name, part in zip(("train", "val", "test"), splits):
        values = part.values
        if standardizer is not None:
            values = standardizer.transform(values)
        stride = cfg.window_stride if name == "train" else 1
        windows[name] = make_windows(values.astype(np.float32),
                                     cfg.t_past, cfg.t_future, stride=stride)
    return PreparedData(raw=raw, splits=splits, windows=windows,
                        standardizer=standardizer)


def model_config(cfg: ExperimentConfig, n: int, d: int) -> ModelConfig:
    return ModelConfig(n=n, t_past=cfg.t_past, t_future=cfg.t_future, d=d,
                       n_block=cfg.n_block, m_neuron=cfg.m_neuron,
                       seed=cfg.seed, pre_activation=cfg.pre_activation,
                       random_projection=cfg.random_projection,
                       frequency_domain=cfg.frequency_domain,
                       complex_bias=cfg.complex_bias)


def train_model(cfg: ExperimentConfig, prepared: PreparedData, log=None):
    """Build and fit the model per the experiment config; returns (model, history)."""
    model = build_model(model_config(cfg, prepared.n, prepared.d))
    train = prepared.windows["train"]
    val = prepared.windows["val"]
    history = fit(model, (train.x, train.y), (val.x, val.y),
                  loss_kind=cfg.loss, max_epochs=cfg.max_epochs,
                  batch_size=cfg.batch_size, lr=cfg.lr,
                  weight_decay=cfg.weight_decay, patience=cfg.patience,
                  shuffle_seed=cfg.seed,
                  standardizer=prepared.standardizer, log=log)
    return model, history


def predict(model, dataset: WindowedDataset, standardizer,
            batch_size: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Raw-scale (predictions, targets) over a windowed split."""
    preds = []
    for start in range(0, len(dataset), batch_size):
        preds.append(model.forward(dataset.x[start:start + batch_size]))
    pred = np.concatenate(preds)
    target = dataset.y
    if standardizer is not None:
        pred = standardizer.inverse_transform_target(pred)
        target = standardizer.inverse_transform_target(target)
    return pred, target


def evaluate_model(model, dataset: WindowedDataset, standardizer,
                   mask_zero: bool = True) -> MetricReport:
    pred, target = predict(model, dataset, standardizer)
    return metrics(pred, target, mask_zero=mask_zero)
