"""Flat key=value experiment configuration ('#' starts a comment).

The same parser backs experiment configs and synthetic-data specs, and a
config always serializes back out beside a run's outputs.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from .data import SyntheticSpec

__all__ = ["ConfigError", "ExperimentConfig", "parse_kv", "format_kv",
           "parse_synthetic_spec"]


class ConfigError(ValueError):
    """Bad key, bad value, or unparseable config text."""


def parse_kv(text: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def format_kv(pairs: dict) -> str:
    return "".join(f"{k}={v}\n" for k, v in pairs.items())


def _convert(key: str, raw: str, typ):
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        return typ(raw)
    except ValueError:
        raise ConfigError(f"key {key!r}: cannot parse {raw!r} as {typ.__name__}") from None


@dataclass
class ExperimentConfig:
    dataset: str = ""            # path to csv/binary data; empty = synthetic
    synthetic: bool = False
    synthetic_n: int = 32
    synthetic_steps: int = 2688
    synthetic_noise_std: float = 0.1
    aggregate_minutes: int = 0   # 0 = no aggregation
    t_past: int = 12
    t_future: int = 12
    n_block: int = 8
    m_neuron: float = 1.0
    seed: int = 0
    loss: str = "mae"
    batch_size: int = 32
    lr: float = 1e-3
    weight_decay: float = 0.01
    max_epochs: int = 100
    patience: int = 7
    window_stride: int = 1
    pre_activation: bool = True
    random_projection: bool = True
    frequency_domain: bool = True
    complex_bias: bool = True
    standardize: bool = True
    mask_zero: bool = True

    def __post_init__(self):
        if self.loss not in ("mae", "mse"):
            raise ConfigError(f"loss must be mae or mse, got {self.loss!r}")

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        pairs = parse_kv(text)
        kwargs = {}
        known = {f.name: f.type for f in fields(cls)}
        types = {f.name: type(getattr(cls(), f.name)) for f in fields(cls)}
        for key, raw in pairs.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = _convert(key, raw, types[key])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        return cls.from_text(text)

    def to_text(self) -> str:
        return format_kv(asdict(self))

    def to_file(self, path):
        with open(path, "w") as f:
            f.write(self.to_text())


_SPEC_DEFAULTS = SyntheticSpec()


def parse_synthetic_spec(text: str) -> SyntheticSpec:
    pairs = parse_kv(text)
    kwargs = {}
    for key, raw in pairs.items():
        if not hasattr(_SPEC_DEFAULTS, key):
            raise ConfigError(f"unknown synthetic spec key {key!r}")
        default = getattr(_SPEC_DEFAULTS, key)
        if isinstance(default, tuple):
            parts = raw.split(":")
            if len(parts) != 2:
                raise ConfigError(f"key {key!r}: expected lo:hi, got {raw!r}")
            kwargs[key] = (float(parts[0]), float(parts[1]))
        else:
            kwargs[key] = _convert(key, raw, type(default))
    return SyntheticSpec(**kwargs)
