"""Core numeric primitives: seeded RNG, dense array ops, and the real FFT pair.

Arrays are plain numpy ndarrays (row-major, float32 by default, float64 for
verification runs). All functions here are pure; the only stateful object is
SeededRng, which is single-owner by convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ShapeError",
    "SeededRng",
    "randn",
    "ComplexSpectrum",
    "matmul",
    "transpose",
    "relu",
    "relu_backward",
    "rfft",
    "irfft",
    "rfft_adjoint",
    "irfft_adjoint",
]


class ShapeError(ValueError):
    """Raised when operand dimensions are inconsistent."""


_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_INV_2_53 = 2.0 ** -53


def _splitmix64(z: np.ndarray) -> np.ndarray:
    # Standard splitmix64 finalizer; operates on uint64 arrays.
    z = (z ^ (z >> 30)) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> 27)) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> 31)


class SeededRng:
    """Deterministic 64-bit PRNG (splitmix64) with Box-Muller normals.

    The value stream depends only on the seed, so results are reproducible
    across runs and platforms. Each instance owns its counter; do not share
    one instance across threads.
    """

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        self._counter = 0

    def _raw(self, count: int) -> np.ndarray:
        idx = np.arange(self._counter + 1, self._counter + count + 1, dtype=np.uint64)
        self._counter += count
        with np.errstate(over="ignore"):
            state = (np.uint64(self.seed) + idx * np.uint64(_GOLDEN)) & np.uint64(_MASK64)
            return _splitmix64(state)

    def uniform(self, shape, dtype=np.float32) -> np.ndarray:
        """Uniform samples in [0, 1) with 53-bit resolution."""
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        u = (self._raw(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53
        return u.reshape(shape).astype(dtype)

    def normal(self, shape, dtype=np.float32) -> np.ndarray:
        """Standard normal samples via the Box-Muller transform."""
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        half = (n + 1) // 2
        # u1 shifted into (0, 1] so log() is finite.
        u1 = ((self._raw(half) >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53
        u2 = (self._raw(half) >> np.uint64(11)).astype(np.float64) * _INV_2_53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return z.reshape(shape).astype(dtype)


def randn(rng: SeededRng, shape, dtype=np.float32) -> np.ndarray:
    """i.i.d. standard normal tensor drawn from the seeded stream (unscaled)."""
    return rng.normal(shape, dtype=dtype)


@dataclass
class ComplexSpectrum:
    """One-sided spectrum of a real signal: floor(t/2)+1 bins, DC first."""

    real: np.ndarray
    imag: np.ndarray

    def __post_init__(self):
        if self.real.shape != self.imag.shape:
            raise ShapeError(
                f"spectrum real/imag shapes differ: {self.real.shape} vs {self.imag.shape}"
            )

    @property
    def bins(self) -> int:
        return self.real.shape[-1]

    def to_complex(self) -> np.ndarray:
        return self.real + 1j * self.imag


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with an explicit inner-dimension check."""
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs rank >= 2 operands, got {a.ndim} and {b.ndim}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dims disagree: {a.shape} x {b.shape}")
    return a @ b


def transpose(a: np.ndarray) -> np.ndarray:
    """Swap the last two axes (plain transpose for rank-2 inputs)."""
    if a.ndim < 2:
        raise ShapeError(f"transpose needs rank >= 2, got rank {a.ndim}")
    return np.swapaxes(a, -1, -2)


def relu(a: np.ndarray) -> np.ndarray:
    return np.maximum(a, 0)


def relu_backward(a: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Pass upstream where a > 0; the subgradient at exactly 0 is taken as 0."""
    if a.shape != upstream.shape:
        raise ShapeError(f"relu_backward shapes differ: {a.shape} vs {upstream.shape}")
    return np.where(a > 0, upstream, 0)


def rfft(signal: np.ndarray) -> ComplexSpectrum:
    """One-sided DFT along the last axis (forward unnormalized, DC bin first)."""
    spec = np.fft.rfft(signal, axis=-1)
    return ComplexSpectrum(np.ascontiguousarray(spec.real), np.ascontiguousarray(spec.imag))


def irfft(spectrum: ComplexSpectrum, t: int) -> np.ndarray:
    """Real inverse of rfft, scaled by 1/t.

    Imaginary components at DC (and at Nyquist for even t), which a real
    signal cannot produce, are discarded.
    """
    expected = t // 2 + 1
    if spectrum.bins != expected:
        raise ShapeError(
            f"spectrum has {spectrum.bins} bins, length {t} needs {expected}"
        )
    c = spectrum.to_complex().copy()
    c[..., 0] = c[..., 0].real
    if t % 2 == 0 and t > 1:
        c[..., -1] = c[..., -1].real
    return np.fft.irfft(c, n=t, axis=-1)


def _hermitian_weights(t: int, dtype=np.float64) -> np.ndarray:
    """Per-bin multiplicity of the one-sided representation (1 for DC/Nyquist, 2 else)."""
    b = t // 2 + 1
    w = np.full(b, 2.0, dtype=dtype)
    w[0] = 1.0
    if t % 2 == 0 and t > 1:
        w[-1] = 1.0
    return w


def irfft_adjoint(upstream: np.ndarray, t: int) -> np.ndarray:
    """Adjoint of irfft as a real-linear map: (w/t) * rfft(upstream), complex output."""
    w = _hermitian_weights(t)
    return np.fft.rfft(upstream, axis=-1) * (w / t)


def rfft_adjoint(upstream_complex: np.ndarray, t: int) -> np.ndarray:
    """Adjoint of rfft as a real-linear map from the one-sided spectrum back to R^t."""
    w = _hermitian_weights(t)
    return np.fft.irfft(upstream_complex / w, n=t, axis=-1) * t
