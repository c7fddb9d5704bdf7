"""The three layer types with explicit forward and backward passes.

Gradients are accumulated into per-layer buffers (no autodiff tape). The
random projection layer is frozen: it has no gradient buffers and its
weight never changes after construction.
"""

from __future__ import annotations

import numpy as np

from .tensor import (
    SeededRng,
    ShapeError,
    irfft_adjoint,
    randn,
    rfft_adjoint,
)

__all__ = [
    "LinearLayer",
    "ComplexLinearLayer",
    "RandomProjectionLayer",
    "init_linear",
    "init_complex_linear",
    "linear_forward",
    "linear_backward",
    "complex_linear_forward",
    "complex_linear_backward",
    "random_projection_forward",
    "random_projection_backward",
]


class LinearLayer:
    """Trainable affine map y = x W^T + b."""

    def __init__(self, weight: np.ndarray, bias: np.ndarray):
        if weight.ndim != 2 or bias.shape != (weight.shape[0],):
            raise ShapeError(f"bad linear shapes: W {weight.shape}, b {bias.shape}")
        self.weight = weight
        self.bias = bias
        self.grad_weight = np.zeros_like(weight)
        self.grad_bias = np.zeros_like(bias)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    def zero_grad(self):
        self.grad_weight[...] = 0
        self.grad_bias[...] = 0

    def parameters(self):
        yield "weight", self.weight, self.grad_weight
        yield "bias", self.bias, self.grad_bias


class ComplexLinearLayer:
    """Frequency-domain linear map on the one-sided spectrum of a length-t signal.

    The complex weight W_real + i W_imag is square over the b = floor(t/2)+1
    bins; an optional complex bias is added in the frequency domain.
    """

    def __init__(self, t: int, w_real, w_imag, b_real, b_imag, use_bias: bool = True):
        b = t // 2 + 1
        if w_real.shape != (b, b) or w_imag.shape != (b, b):
            raise ShapeError(f"complex weights must be {b}x{b}, got {w_real.shape}")
        self.t = t
        self.bins = b
        self.w_real = w_real
        self.w_imag = w_imag
        self.b_real = b_real
        self.b_imag = b_imag
        self.use_bias = use_bias
        self.grad_w_real = np.zeros_like(w_real)
        self.grad_w_imag = np.zeros_like(w_imag)
        self.grad_b_real = np.zeros_like(b_real)
        self.grad_b_imag = np.zeros_like(b_imag)

    def zero_grad(self):
        self.grad_w_real[...] = 0
        self.grad_w_imag[...] = 0
        self.grad_b_real[...] = 0
        self.grad_b_imag[...] = 0

    def parameters(self):
        yield "w_real", self.w_real, self.grad_w_real
        yield "w_imag", self.w_imag, self.grad_w_imag
        if self.use_bias:
            yield "b_real", self.b_real, self.grad_b_real
            yield "b_imag", self.b_imag, self.grad_b_imag


class RandomProjectionLayer:
    """Fixed random linear map: unscaled standard-normal weight, no bias.

    Reconstructing with the same seed gives a bit-identical weight; the
    weight is never updated (no gradient buffer exists).
    """

    def __init__(self, in_dim: int, out_dim: int, seed: int, dtype=np.float32):
        self.seed = seed
        self.weight = randn(SeededRng(seed), (out_dim, in_dim), dtype=dtype)
        self.weight.flags.writeable = False

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


def init_linear(rng: SeededRng, in_dim: int, out_dim: int, dtype=np.float32) -> LinearLayer:
    """Weights uniform on [-1/sqrt(in), +1/sqrt(in)], bias zeros."""
    bound = 1.0 / np.sqrt(in_dim)
    w = (rng.uniform((out_dim, in_dim), dtype=np.float64) * 2 - 1) * bound
    return LinearLayer(w.astype(dtype), np.zeros(out_dim, dtype=dtype))


def init_complex_linear(rng: SeededRng, t: int, use_bias: bool = True,
                        dtype=np.float32) -> ComplexLinearLayer:
    """Each real component uniform on [-1/sqrt(b), +1/sqrt(b)], biases zero."""
    b = t // 2 + 1
    bound = 1.0 / np.sqrt(b)
    wr = ((rng.uniform((b, b), dtype=np.float64) * 2 - 1) * bound).astype(dtype)
    wi = ((rng.uniform((b, b), dtype=np.float64) * 2 - 1) * bound).astype(dtype)
    return ComplexLinearLayer(t, wr, wi, np.zeros(b, dtype=dtype),
                              np.zeros(b, dtype=dtype), use_bias=use_bias)


def _check_last_dim(x: np.ndarray, dim: int, what: str):
    if x.shape[-1] != dim:
        raise ShapeError(f"{what}: last dim {x.shape[-1]} != {dim}")


def linear_forward(layer: LinearLayer, x: np.ndarray) -> np.ndarray:
    _check_last_dim(x, layer.in_dim, "linear_forward")
    return x @ layer.weight.T + layer.bias


def linear_backward(layer: LinearLayer, x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Returns the input gradient; accumulates grad_weight and grad_bias."""
    _check_last_dim(x, layer.in_dim, "linear_backward")
    _check_last_dim(upstream, layer.out_dim, "linear_backward")
    up2 = upstream.reshape(-1, layer.out_dim)
    x2 = x.reshape(-1, layer.in_dim)
    layer.grad_weight += up2.T @ x2
    layer.grad_bias += up2.sum(axis=0)
    return upstream @ layer.weight


def complex_linear_forward(layer: ComplexLinearLayer, x: np.ndarray,
                           cache: dict | None = None) -> np.ndarray:
    """rfft -> complex matrix multiply (four real products) -> bias -> irfft."""
    _check_last_dim(x, layer.t, "complex_linear_forward")
    spec = np.fft.rfft(x, axis=-1)
    xr, xi = spec.real, spec.imag
    out_r = xr @ layer.w_real.T - xi @ layer.w_imag.T
    out_i = xi @ layer.w_real.T + xr @ layer.w_imag.T
    if layer.use_bias:
        out_r = out_r + layer.b_real
        out_i = out_i + layer.b_imag
    t = layer.t
    out = out_r + 1j * out_i
    # A real output cannot carry imaginary DC/Nyquist energy; discard it.
    out[..., 0] = out[..., 0].real
    if t % 2 == 0 and t > 1:
        out[..., -1] = out[..., -1].real
    y = np.fft.irfft(out, n=t, axis=-1).astype(x.dtype)
    if cache is not None:
        cache["xr"], cache["xi"] = xr, xi
    return y


def complex_linear_backward(layer: ComplexLinearLayer, x: np.ndarray,
                            upstream: np.ndarray,
                            cache: dict | None = None) -> np.ndarray:
    """Chain rule through irfft, the four real matrix products, and rfft."""
    _check_last_dim(upstream, layer.t, "complex_linear_backward")
    if cache is not None and "xr" in cache:
        xr, xi = cache["xr"], cache["xi"]
    else:
        spec = np.fft.rfft(x, axis=-1)
        xr, xi = spec.real, spec.imag
    g = irfft_adjoint(upstream, layer.t)
    gr, gi = np.ascontiguousarray(g.real), np.ascontiguousarray(g.imag)

    b = layer.bins
    gr2 = gr.reshape(-1, b)
    gi2 = gi.reshape(-1, b)
    xr2 = xr.reshape(-1, b)
    xi2 = xi.reshape(-1, b)
    layer.grad_w_real += gr2.T @ xr2 + gi2.T @ xi2
    layer.grad_w_imag += gi2.T @ xr2 - gr2.T @ xi2
    if layer.use_bias:
        layer.grad_b_real += gr2.sum(axis=0)
        layer.grad_b_imag += gi2.sum(axis=0)

    gxr = gr @ layer.w_real + gi @ layer.w_imag
    gxi = gi @ layer.w_real - gr @ layer.w_imag
    return rfft_adjoint(gxr + 1j * gxi, layer.t).astype(upstream.dtype)


def random_projection_forward(layer: RandomProjectionLayer, x: np.ndarray) -> np.ndarray:
    _check_last_dim(x, layer.in_dim, "random_projection_forward")
    return x @ layer.weight.T


def random_projection_backward(layer: RandomProjectionLayer,
                               upstream: np.ndarray) -> np.ndarray:
    """Input gradient only; the frozen weight accumulates nothing."""
    _check_last_dim(upstream, layer.out_dim, "random_projection_backward")
    return upstream @ layer.weight
