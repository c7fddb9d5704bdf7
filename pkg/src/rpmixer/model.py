"""Mixer blocks, the full network, ablation variants, and the path decomposition.

Shapes: a sample is an n x t matrix (nodes x time); all ops also accept a
leading batch axis. With d features the time axis holds the flattened
d*t_past layout produced by the data module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .layers import (
    ComplexLinearLayer,
    LinearLayer,
    RandomProjectionLayer,
    complex_linear_backward,
    complex_linear_forward,
    init_complex_linear,
    init_linear,
    linear_backward,
    linear_forward,
    random_projection_backward,
    random_projection_forward,
)
from .tensor import SeededRng, ShapeError, relu, relu_backward, transpose

__all__ = ["ModelConfig", "MixerBlock", "RPMixerModel", "build_model",
           "build_ablation", "model_forward", "model_backward", "path_decompose"]


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass
class ModelConfig:
    n: int
    t_past: int = 12
    t_future: int = 12
    d: int = 1
    n_block: int = 8
    m_neuron: float = 1.0
    seed: int = 0
    pre_activation: bool = True
    random_projection: bool = True
    frequency_domain: bool = True
    complex_bias: bool = True
    dtype: str = "float32"

    @property
    def n_rand(self) -> int:
        return max(1, round_half_up(self.m_neuron * math.sqrt(self.n)))

    @property
    def t(self) -> int:
        # Block width: features are flattened into the time axis.
        return self.d * self.t_past

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)

    def validate(self):
        if self.n < 1 or self.t_past < 1 or self.t_future < 1 or self.d < 1:
            raise ValueError("dimensions must be positive")
        if self.n_block < 1:
            raise ValueError("n_block must be >= 1")


class MixerBlock:
    """Temporal sub-block + spatial sub-block, shape-preserving on n x t."""

    def __init__(self, temporal, spatial_proj, spatial_out: LinearLayer,
                 pre_activation: bool):
        self.temporal = temporal
        self.spatial_proj = spatial_proj
        self.spatial_out = spatial_out
        self.pre_activation = pre_activation

    @property
    def proj_trainable(self) -> bool:
        return isinstance(self.spatial_proj, LinearLayer)

    def _temporal_forward(self, x, cache):
        if isinstance(self.temporal, ComplexLinearLayer):
            return complex_linear_forward(self.temporal, x, cache)
        return linear_forward(self.temporal, x)

    def _temporal_backward(self, x, up, cache):
        if isinstance(self.temporal, ComplexLinearLayer):
            return complex_linear_backward(self.temporal, x, up, cache)
        return linear_backward(self.temporal, x, up)

    def _proj_forward(self, x):
        if self.proj_trainable:
            return linear_forward(self.spatial_proj, x)
        return random_projection_forward(self.spatial_proj, x)

    def _proj_backward(self, x, up):
        if self.proj_trainable:
            return linear_backward(self.spatial_proj, x, up)
        return random_projection_backward(self.spatial_proj, up)

    def forward(self, x: np.ndarray):
        """Returns (y, cache); cache feeds backward()."""
        cache: dict = {"x": x}
        if self.pre_activation:
            a = relu(x)
            cache["a"] = a
            t_out = self._temporal_forward(a, cache)
            m = t_out + x
            mt = transpose(m)
            r1 = relu(mt)
            p = self._proj_forward(r1)
            r2 = relu(p)
            s = transpose(linear_forward(self.spatial_out, r2))
            y = s + m
            cache.update(m=m, mt=mt, r1=r1, p=p, r2=r2)
        else:
            # Post-activation ablation: ReLU after the weighted layers and on
            # the residual sums, so no pure identity path survives.
            t_out = self._temporal_forward(x, cache)
            m = relu(t_out + x)
            cache["pre_m"] = t_out + x
            mt = transpose(m)
            p = self._proj_forward(mt)
            r1 = relu(p)
            s = transpose(linear_forward(self.spatial_out, r1))
            pre_y = s + m
            y = relu(pre_y)
            cache.update(m=m, mt=mt, p=p, r1=r1, pre_y=pre_y)
        cache["y"] = y
        return y, cache

    def backward(self, cache: dict, upstream: np.ndarray) -> np.ndarray:
        x = cache["x"]
        if self.pre_activation:
            g_m = upstream.copy()
            g_l = transpose(upstream)
            g_r2 = linear_backward(self.spatial_out, cache["r2"], g_l)
            g_p = relu_backward(cache["p"], g_r2)
            g_r1 = self._proj_backward(cache["r1"], g_p)
            g_mt = relu_backward(cache["mt"], g_r1)
            g_m += transpose(g_mt)
            g_x = g_m.copy()
            g_a = self._temporal_backward(cache["a"], g_m, cache)
            g_x += relu_backward(x, g_a)
        else:
            g_pre_y = relu_backward(cache["pre_y"], upstream)
            g_m = g_pre_y.copy()
            g_l = transpose(g_pre_y)
            g_r1 = linear_backward(self.spatial_out, cache["r1"], g_l)
            g_p = relu_backward(cache["p"], g_r1)
            g_mt = self._proj_backward(cache["mt"], g_p)
            g_m += transpose(g_mt)
            g_pre_m = relu_backward(cache["pre_m"], g_m)
            g_x = g_pre_m.copy()
            g_x += self._temporal_backward(x, g_pre_m, cache)
        return g_x

    def parameters(self, prefix: str):
        for name, p, g in self.temporal.parameters():
            yield f"{prefix}.temporal.{name}", p, g
        if self.proj_trainable:
            for name, p, g in self.spatial_proj.parameters():
                yield f"{prefix}.proj.{name}", p, g
        for name, p, g in self.spatial_out.parameters():
            yield f"{prefix}.out.{name}", p, g

    def zero_grad(self):
        self.temporal.zero_grad()
        if self.proj_trainable:
            self.spatial_proj.zero_grad()
        self.spatial_out.zero_grad()


class RPMixerModel:
    """Stack of mixer blocks followed by a per-node output linear layer."""

    def __init__(self, config: ModelConfig, blocks: list[MixerBlock],
                 output: LinearLayer):
        self.config = config
        self.blocks = blocks
        self.output = output

    def forward(self, x: np.ndarray, caches: list | None = None) -> np.ndarray:
        if x.shape[-1] != self.config.t or x.shape[-2] != self.config.n:
            raise ShapeError(
                f"input {x.shape} incompatible with model "
                f"(n={self.config.n}, t={self.config.t})"
            )
        z = x
        for block in self.blocks:
            z, cache = block.forward(z)
            if caches is not None:
                caches.append(cache)
        return linear_forward(self.output, z)

    def backward(self, caches: list, grad_output: np.ndarray) -> np.ndarray:
        if len(caches) != len(self.blocks):
            raise ValueError("cache does not match model (run forward with caches)")
        g = linear_backward(self.output, caches[-1]["y"], grad_output)
        for block, cache in zip(reversed(self.blocks), reversed(caches)):
            g = block.backward(cache, g)
        return g

    def forward_backward(self, x: np.ndarray, grad_fn):
        """Forward, then backprop of grad_fn(prediction); returns (pred, aux)."""
        caches: list = []
        z = x
        for block in self.blocks:
            z, cache = block.forward(z)
            caches.append(cache)
        pred = linear_forward(self.output, z)
        grad_pred, aux = grad_fn(pred)
        g = linear_backward(self.output, z, grad_pred)
        for block, cache in zip(reversed(self.blocks), reversed(caches)):
            g = block.backward(cache, g)
        return pred, aux

    def parameters(self):
        """Trainable (name, value, grad) triples; frozen projections excluded."""
        for i, block in enumerate(self.blocks):
            yield from block.parameters(f"block{i}")
        for name, p, g in self.output.parameters():
            yield f"output.{name}", p, g

    def zero_grad(self):
        for block in self.blocks:
            block.zero_grad()
        self.output.zero_grad()

    def state_arrays(self):
        """All parameter arrays (trainable + frozen), for checkpointing."""
        for i, block in enumerate(self.blocks):
            for name, p, _ in block.parameters(f"block{i}"):
                yield name, p
            if not block.proj_trainable:
                yield f"block{i}.proj.weight", block.spatial_proj.weight
        for name, p, _ in self.output.parameters():
            yield f"output.{name}", p

    def get_state(self) -> dict:
        return {name: p.copy() for name, p in self.state_arrays()}

    def set_state(self, state: dict):
        for name, p in self.state_arrays():
            src = state[name]
            if src.shape != p.shape:
                raise ShapeError(f"state {name}: shape {src.shape} != {p.shape}")
            writeable = p.flags.writeable
            p.flags.writeable = True
            p[...] = src
            p.flags.writeable = writeable

    def parameter_count(self) -> int:
        """Learnable parameters only (frozen projections excluded)."""
        return sum(p.size for _, p, _ in self.parameters())


def build_model(config: ModelConfig) -> RPMixerModel:
    """Construct the network; ablation flags in the config select variants.

    Block i (1-based) derives its projection seed as seed + i; trainable
    parameters draw from a single stream seeded with the global seed.
    """
    config.validate()
    dtype = config.np_dtype
    rng = SeededRng(config.seed)
    t = config.t
    blocks = []
    for i in range(config.n_block):
        if config.frequency_domain:
            temporal = init_complex_linear(rng, t, use_bias=config.complex_bias,
                                           dtype=dtype)
        else:
            temporal = init_linear(rng, t, t, dtype=dtype)
        if config.random_projection:
            proj = RandomProjectionLayer(config.n, config.n_rand,
                                         seed=config.seed + i + 1, dtype=dtype)
        else:
            proj = init_linear(rng, config.n, config.n_rand, dtype=dtype)
        spatial_out = init_linear(rng, config.n_rand, config.n, dtype=dtype)
        blocks.append(MixerBlock(temporal, proj, spatial_out,
                                 pre_activation=config.pre_activation))
    output = init_linear(rng, t, config.t_future, dtype=dtype)
    return RPMixerModel(config, blocks, output)


def build_ablation(config: ModelConfig, pre_activation: bool = True,
                   random_projection: bool = True,
                   frequency_domain: bool = True) -> RPMixerModel:
    return build_model(replace(config, pre_activation=pre_activation,
                               random_projection=random_projection,
                               frequency_domain=frequency_domain))


def model_forward(model: RPMixerModel, x: np.ndarray) -> np.ndarray:
    return model.forward(x)


def model_backward(model: RPMixerModel, caches: list,
                   grad_output: np.ndarray) -> np.ndarray:
    return model.backward(caches, grad_output)


def path_decompose(model: RPMixerModel, x: np.ndarray):
    """Split the prediction into the direct path plus one term per block.

    Returns (y0, contributions, y) with y0 = output(x) (bias applied here,
    exactly once) and contribution_i = H_i W_out^T, where H_i is block i's
    weighted-path output given the running sum of earlier paths. The parts
    sum back to the full forward pass.
    """
    if not model.config.pre_activation:
        raise ValueError("path decomposition needs a pre-activation model "
                         "(post-activation blocks have no identity path)")
    w_out = model.output.weight
    z = x
    contributions = []
    for block in model.blocks:
        y_blk, _ = block.forward(z)
        h = y_blk - z
        contributions.append(h @ w_out.T)
        z = y_blk
    y0 = linear_forward(model.output, x)
    y = linear_forward(model.output, z)
    return y0, contributions, y
