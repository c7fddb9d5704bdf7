"""Dataset ingestion, aggregation, splitting, windowing, and synthetic data.

Series are stored as (n, d, t) arrays: nodes x features x time. Any
adjacency matrix supplied by a dataset is carried as opaque payload only;
the model never consumes it.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .tensor import SeededRng

__all__ = ["RawSeries", "WindowedDataset", "SyntheticSpec", "DataError",
           "aggregate", "chronological_split", "make_windows",
           "synthetic_generate", "load_csv", "save_csv",
           "load_binary", "save_binary"]

BINARY_MAGIC = b"RPMX"
BINARY_VERSION = 1


class DataError(ValueError):
    """Malformed input data or an impossible request."""


@dataclass
class RawSeries:
    values: np.ndarray  # (n, d, t)
    interval_minutes: int = 15
    start_timestamp: int = 0
    adjacency: np.ndarray | None = None

    def __post_init__(self):
        if self.values.ndim != 3:
            raise DataError(f"series must be (n, d, t), got {self.values.shape}")
        if np.isnan(self.values).any():
            raise DataError("series contains NaN after ingestion")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def t(self) -> int:
        return self.values.shape[2]


@dataclass
class WindowedDataset:
    """Chronologically ordered (X_past, X_future) pairs.

    x: (N, n, d*t_past) with features flattened into the time axis
    (feature-major: d contiguous runs of t_past). y: (N, n, t_future),
    feature 0 only.
    """

    x: np.ndarray
    y: np.ndarray
    t_past: int
    t_future: int

    def __len__(self) -> int:
        return self.x.shape[0]


def aggregate(raw: RawSeries, target_minutes: int) -> RawSeries:
    """Mean over non-overlapping windows; a trailing partial window is dropped."""
    if target_minutes % raw.interval_minutes != 0:
        raise DataError(
            f"{target_minutes}-min windows not divisible by "
            f"{raw.interval_minutes}-min source interval")
    factor = target_minutes // raw.interval_minutes
    if factor == 1:
        return raw
    t_eff = (raw.t // factor) * factor
    v = raw.values[:, :, :t_eff].reshape(raw.n, raw.d, -1, factor).mean(axis=-1)
    return RawSeries(v, interval_minutes=target_minutes,
                     start_timestamp=raw.start_timestamp,
                     adjacency=raw.adjacency)


def chronological_split(raw: RawSeries, ratios=(6, 2, 2)):
    """Contiguous train/val/test partitions; boundaries at floor(cumfrac * t)."""
    if any(r <= 0 for r in ratios) or len(ratios) != 3:
        raise DataError(f"ratios must be three positive numbers, got {ratios}")
    total = sum(ratios)
    b1 = math.floor(ratios[0] / total * raw.t)
    b2 = math.floor((ratios[0] + ratios[1]) / total * raw.t)
    if b1 == 0 or b2 == b1 or b2 == raw.t:
        raise DataError(f"split of t={raw.t} with ratios {ratios} leaves an empty part")
    parts = []
    for lo, hi in ((0, b1), (b1, b2), (b2, raw.t)):
        start = raw.start_timestamp + lo * raw.interval_minutes * 60
        parts.append(RawSeries(raw.values[:, :, lo:hi].copy(),
                               interval_minutes=raw.interval_minutes,
                               start_timestamp=start,
                               adjacency=raw.adjacency))
    return tuple(parts)


def make_windows(values: np.ndarray, t_past: int, t_future: int,
                 stride: int = 1) -> WindowedDataset:
    """Sliding (past, future) pairs over a (n, d, t) array, windows within
    the given slice only (no cross-split leakage by construction)."""
    if values.ndim != 3:
        raise DataError(f"expected (n, d, t), got {values.shape}")
    n, d, t = values.shape
    if t < t_past + t_future:
        raise DataError(f"series length {t} < t_past+t_future = {t_past + t_future}")
    count = (t - t_past - t_future) // stride + 1
    xs = np.empty((count, n, d * t_past), dtype=values.dtype)
    ys = np.empty((count, n, t_future), dtype=values.dtype)
    for i in range(count):
        off = i * stride
        xs[i] = values[:, :, off:off + t_past].reshape(n, d * t_past)
        ys[i] = values[:, 0, off + t_past:off + t_past + t_future]
    return WindowedDataset(xs, ys, t_past, t_future)


@dataclass
class SyntheticSpec:
    """Traffic-like periodic generator: daily/weekly sinusoids, shared latent
    factors for cross-node coupling, Gaussian noise, shifted non-negative."""

    n: int = 32
    steps: int = 2688
    steps_per_day: int = 96
    daily_amplitude: tuple = (0.5, 2.0)
    weekly_amplitude: tuple = (0.1, 0.4)
    n_factors: int = 2
    factor_scale: float = 0.5
    noise_std: float = 0.1
    seed: int = 0


def synthetic_generate(spec: SyntheticSpec) -> RawSeries:
    rng = SeededRng(spec.seed)
    i = np.arange(spec.steps, dtype=np.float64)
    day = 2 * np.pi * i / spec.steps_per_day
    week = 2 * np.pi * i / (7 * spec.steps_per_day)

    lo, hi = spec.daily_amplitude
    wlo, whi = spec.weekly_amplitude
    wamp = rng.uniform((spec.n,), dtype=np.float64) * (whi - wlo) + wlo
    wphase = rng.uniform((spec.n,), dtype=np.float64) * 2 * np.pi

    # Per-node daily shape: a random mix of the first three daily harmonics,
    # so cross-node coupling comes from the shared factors, not a common tone.
    n_harm = 3
    amp = rng.uniform((spec.n, n_harm), dtype=np.float64) * (hi - lo) + lo
    amp /= np.arange(1, n_harm + 1)
    phase = rng.uniform((spec.n, n_harm), dtype=np.float64) * 2 * np.pi
    series = np.zeros((spec.n, spec.steps))
    for h in range(n_harm):
        series += amp[:, h:h + 1] * np.sin((h + 1) * day[None, :]
                                           + phase[:, h:h + 1])
    series *= 1.0 + wamp[:, None] * np.sin(week[None, :] + wphase[:, None])

    if spec.n_factors > 0:
        fphase = rng.uniform((spec.n_factors,), dtype=np.float64) * 2 * np.pi
        loadings = rng.normal((spec.n, spec.n_factors), dtype=np.float64)
        factors = np.sin(day[None, :] + fphase[:, None])  # (k, steps)
        series += spec.factor_scale * loadings @ factors

    if spec.noise_std > 0:
        series += spec.noise_std * rng.normal(series.shape, dtype=np.float64)

    series -= series.min(axis=1, keepdims=True)  # per-node shift to >= 0
    return RawSeries(series[:, None, :].astype(np.float32),
                     interval_minutes=15, start_timestamp=0)


def save_csv(raw: RawSeries, path):
    """Columns = nodes, rows = timesteps, header of node ids; feature 0 only."""
    header = ",".join(f"node{j}" for j in range(raw.n))
    with open(path, "w") as f:
        f.write(header + "\n")
        for row in raw.values[:, 0, :].T:
            f.write(",".join(repr(float(v)) for v in row) + "\n")


def load_csv(path, interval_minutes: int = 15, forward_fill: bool = False) -> RawSeries:
    with open(path) as f:
        header = f.readline().strip()
        if not header:
            raise DataError(f"{path}: empty or missing header row")
        n = len(header.split(","))
        rows = []
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != n:
                raise DataError(f"{path}: row {lineno} has {len(cells)} cells, "
                                f"expected {n}")
            row = np.empty(n)
            for col, cell in enumerate(cells):
                try:
                    row[col] = float(cell)
                except ValueError:
                    raise DataError(f"{path}: non-numeric cell at row {lineno}, "
                                    f"column {col + 1} ({cell!r})") from None
                if math.isnan(row[col]) and not forward_fill:
                    raise DataError(f"{path}: NaN at row {lineno}, column {col + 1}")
            rows.append(row)
    if not rows:
        raise DataError(f"{path}: no data rows")
    values = np.asarray(rows).T[:, None, :]  # (n, 1, t)
    if forward_fill:
        for j in range(values.shape[0]):
            v = values[j, 0]
            mask = np.isnan(v)
            if mask[0]:
                first = np.argmin(mask)
                v[:first] = v[first]
                mask = np.isnan(v)
            idx = np.where(~mask, np.arange(len(v)), 0)
            np.maximum.accumulate(idx, out=idx)
            values[j, 0] = v[idx]
    return RawSeries(values.astype(np.float32), interval_minutes=interval_minutes)


def save_binary(raw: RawSeries, path):
    """Format: "RPMX" | version u16 | n u32 | d u32 | t u32 |
    interval_minutes u32 | start_timestamp i64 | f32 LE values
    in (node, feature, time) order."""
    with open(path, "wb") as f:
        f.write(BINARY_MAGIC)
        f.write(struct.pack("<HIIIIq", BINARY_VERSION, raw.n, raw.d, raw.t,
                            raw.interval_minutes, raw.start_timestamp))
        f.write(np.ascontiguousarray(raw.values, dtype="<f4").tobytes())


def load_binary(path) -> RawSeries:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != BINARY_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, expected {BINARY_MAGIC!r}")
        version, n, d, t, interval, start = struct.unpack("<HIIIIq", f.read(26))
        if version != BINARY_VERSION:
            raise DataError(f"{path}: unsupported version {version}")
        payload = f.read(4 * n * d * t)
        if len(payload) != 4 * n * d * t:
            raise DataError(f"{path}: truncated payload")
        values = np.frombuffer(payload, dtype="<f4").reshape(n, d, t).copy()
    return RawSeries(values, interval_minutes=interval, start_timestamp=start)


def load_series(path, interval_minutes: int = 15) -> RawSeries:
    """Dispatch on extension: .csv is text, anything else is the binary format."""
    if str(path).endswith(".csv"):
        return load_csv(path, interval_minutes=interval_minutes)
    return load_binary(path)
