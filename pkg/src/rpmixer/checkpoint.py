"""Model checkpoints: "RPCK" | version | config text | parameter blocks |
optimizer flag | best validation metric. Parameters are f32 little-endian."""

from __future__ import annotations

import struct

import numpy as np

from .config import ExperimentConfig
from .model import ModelConfig, RPMixerModel, build_model

__all__ = ["CheckpointError", "save_checkpoint", "load_checkpoint"]

MAGIC = b"RPCK"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _model_config_from_experiment(cfg: ExperimentConfig, n: int, d: int) -> ModelConfig:
    return ModelConfig(n=n, t_past=cfg.t_past, t_future=cfg.t_future, d=d,
                       n_block=cfg.n_block, m_neuron=cfg.m_neuron,
                       seed=cfg.seed, pre_activation=cfg.pre_activation,
                       random_projection=cfg.random_projection,
                       frequency_domain=cfg.frequency_domain,
                       complex_bias=cfg.complex_bias)


def save_checkpoint(path, model: RPMixerModel, experiment: ExperimentConfig,
                    n: int, d: int, best_metric: float | None = None):
    config_text = experiment.to_text() + f"_model_n={n}\n_model_d={d}\n"
    blob = config_text.encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<H", VERSION))
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        params = list(model.state_arrays())
        f.write(struct.pack("<H", len(params)))
        for name, p in params:
            nb = name.encode()
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            f.write(struct.pack("<B", p.ndim))
            for dim in p.shape:
                f.write(struct.pack("<I", dim))
            f.write(np.ascontiguousarray(p, dtype="<f4").tobytes())
        f.write(struct.pack("<B", 0))  # no optimizer state
        f.write(struct.pack("<B", best_metric is not None))
        if best_metric is not None:
            f.write(struct.pack("<d", best_metric))


def load_checkpoint(path):
    """Returns (model, experiment_config, best_metric)."""
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        (version,) = struct.unpack("<H", f.read(2))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        (blob_len,) = struct.unpack("<I", f.read(4))
        config_text = f.read(blob_len).decode()

        lines = []
        n = d = None
        for line in config_text.splitlines():
            if line.startswith("_model_n="):
                n = int(line.split("=", 1)[1])
            elif line.startswith("_model_d="):
                d = int(line.split("=", 1)[1])
            else:
                lines.append(line)
        if n is None or d is None:
            raise CheckpointError(f"{path}: missing model dimensions")
        experiment = ExperimentConfig.from_text("\n".join(lines))

        model = build_model(_model_config_from_experiment(experiment, n, d))
        state = {}
        (count,) = struct.unpack("<H", f.read(2))
        for _ in range(count):
            (name_len,) = struct.unpack("<H", f.read(2))
            name = f.read(name_len).decode()
            (ndim,) = struct.unpack("<B", f.read(1))
            shape = tuple(struct.unpack("<I", f.read(4))[0] for _ in range(ndim))
            size = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(f.read(4 * size), dtype="<f4").reshape(shape)
            state[name] = data.copy()
        (has_opt,) = struct.unpack("<B", f.read(1))
        if has_opt:
            raise CheckpointError(f"{path}: optimizer state not supported")
        (has_best,) = struct.unpack("<B", f.read(1))
        best = struct.unpack("<d", f.read(8))[0] if has_best else None
    model.set_state(state)
    return model, experiment, best
