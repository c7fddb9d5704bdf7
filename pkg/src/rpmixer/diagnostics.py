"""Ensemble diagnostics: pairwise block correlation vs error, the random
projection distance-preservation check, and path-decomposition verification."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import RPMixerModel, path_decompose
from .tensor import SeededRng, randn

__all__ = ["CorrelationErrorPoint", "JLReport", "correlation_error_diagram",
           "jl_check", "decomposition_residual"]


@dataclass
class CorrelationErrorPoint:
    i: int
    j: int
    pearson: float  # nan when undefined (constant contributions)
    mae_pair: float
    rmse_pair: float
    mape_pair: float

    @property
    def defined(self) -> bool:
        return not np.isnan(self.pearson)


@dataclass
class JLReport:
    n: int
    n_rand: int
    num_vectors: int
    distortions: np.ndarray  # projected distance / (sqrt(n_rand) * original)

    @property
    def median(self) -> float:
        return float(np.median(self.distortions))

    @property
    def iqr(self) -> float:
        q75, q25 = np.percentile(self.distortions, [75, 25])
        return float(q75 - q25)


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a.ravel().astype(np.float64)
    b = b.ravel().astype(np.float64)
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt((a * a).sum() * (b * b).sum())
    if denom == 0:
        return float("nan")
    return float(np.clip((a * b).sum() / denom, -1.0, 1.0))


def correlation_error_diagram(model: RPMixerModel, x: np.ndarray,
                              y_raw: np.ndarray, standardizer=None,
                              mask_zero: bool = True,
                              batch_size: int = 64):
    """One point per block pair: output correlation vs mean pair error.

    Each block's standalone forecast is the shared direct path plus that
    block's contribution, P_i = Y0 + H_i W_out^T; correlations use the
    contributions only, errors use the full per-learner forecasts against
    the raw-scale targets.
    """
    from .evaluation import metrics

    n_block = len(model.blocks)
    if n_block < 2:
        raise ValueError("correlation-error diagram needs at least 2 blocks")

    contribs = [[] for _ in range(n_block)]
    y0_parts = []
    for start in range(0, x.shape[0], batch_size):
        y0, cs, _ = path_decompose(model, x[start:start + batch_size])
        y0_parts.append(y0)
        for i, c in enumerate(cs):
            contribs[i].append(c)
    y0 = np.concatenate(y0_parts)
    contribs = [np.concatenate(c) for c in contribs]

    learner_reports = []
    scaled = []
    for c in contribs:
        pred = y0 + c
        if standardizer is not None:
            pred = standardizer.inverse_transform_target(pred)
            # contribution on the raw scale: scale only, no mean shift
            scaled.append(c * standardizer.std[:, 0, :])
        else:
            scaled.append(c)
        learner_reports.append(metrics(pred, y_raw, mask_zero=mask_zero))

    points = []
    for i in range(n_block):
        for j in range(i + 1, n_block):
            r = _pearson(scaled[i], scaled[j])
            mi, mj = learner_reports[i], learner_reports[j]
            points.append(CorrelationErrorPoint(
                i, j, r,
                mae_pair=(mi.average[0] + mj.average[0]) / 2,
                rmse_pair=(mi.average[1] + mj.average[1]) / 2,
                mape_pair=(mi.average[2] + mj.average[2]) / 2))
    return points, learner_reports


def corr_error_csv(points) -> str:
    lines = ["i,j,pearson,mae_pair,rmse_pair,mape_pair"]
    for p in points:
        r = "nan" if not p.defined else f"{p.pearson:.6f}"
        lines.append(f"{p.i},{p.j},{r},{p.mae_pair:.6f},"
                     f"{p.rmse_pair:.6f},{p.mape_pair:.6f}")
    return "\n".join(lines) + "\n"


def jl_check(n: int, n_rand: int, num_vectors: int, seed: int = 0) -> JLReport:
    """Empirical distance preservation of an unscaled-normal projection.

    Distortion per vector pair: ||Px - Py|| / (sqrt(n_rand) * ||x - y||).
    """
    if num_vectors < 2:
        raise ValueError("need at least 2 vectors")
    if n_rand > n:
        warnings.warn(f"n_rand={n_rand} exceeds n={n}; projection expands")
    rng = SeededRng(seed)
    x = randn(rng, (num_vectors, n), dtype=np.float64)
    w = randn(rng, (n_rand, n), dtype=np.float64)
    p = x @ w.T
    iu, ju = np.triu_indices(num_vectors, k=1)
    orig = np.linalg.norm(x[iu] - x[ju], axis=1)
    proj = np.linalg.norm(p[iu] - p[ju], axis=1)
    keep = orig > 0
    distortions = proj[keep] / (np.sqrt(n_rand) * orig[keep])
    return JLReport(n=n, n_rand=n_rand, num_vectors=num_vectors,
                    distortions=distortions)


def jl_csv(report: JLReport) -> str:
    lines = ["pair_id,distortion"]
    for k, d in enumerate(report.distortions):
        lines.append(f"{k},{d:.6f}")
    return "\n".join(lines) + "\n"


def decomposition_residual(model: RPMixerModel, x: np.ndarray) -> float:
    """Max relative residual of forward vs the unraveled sum of paths."""
    y0, contribs, y = path_decompose(model, x)
    total = y0 + sum(contribs)
    scale = max(float(np.max(np.abs(y))), 1e-12)
    return float(np.max(np.abs(model.forward(x) - total))) / scale
