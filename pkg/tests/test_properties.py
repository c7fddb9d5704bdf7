"""Property-based checks for the structural invariants of the stack."""

import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from rpmixer.data import make_windows
from rpmixer.evaluation import metrics
from rpmixer.model import round_half_up
from rpmixer.tensor import (SeededRng, irfft, irfft_adjoint, rfft,
                            rfft_adjoint, relu, relu_backward)

finite_arrays = hnp.arrays(
    np.float64, st.tuples(st.integers(1, 4), st.integers(1, 16)),
    elements=st.floats(-1e3, 1e3, allow_nan=False))


@given(finite_arrays)
def test_fft_roundtrip_any_shape(x):
    t = x.shape[-1]
    assert np.allclose(irfft(rfft(x), t), x, atol=1e-9 * max(1, np.abs(x).max()))


@given(st.integers(1, 64), st.integers(0, 2 ** 32))
def test_fft_adjoint_identity(t, seed):
    """<rfft(x), U> == <x, rfft_adjoint(U)> for random x, U (real inner product)."""
    rng = SeededRng(seed)
    x = rng.normal((t,), dtype=np.float64)
    b = t // 2 + 1
    u = rng.normal((b,), dtype=np.float64) + 1j * rng.normal((b,), dtype=np.float64)
    spec = rfft(x)
    lhs = float(spec.real @ u.real + spec.imag @ u.imag)
    rhs = float(x @ rfft_adjoint(u, t))
    assert abs(lhs - rhs) < 1e-8 * max(1.0, abs(lhs))


@given(finite_arrays)
def test_relu_backward_masks_exactly(x):
    g = np.ones_like(x)
    masked = relu_backward(x, g)
    assert np.array_equal(masked != 0, (x > 0) & (g != 0))
    assert np.array_equal(relu(x) > 0, x > 0)


@given(st.integers(2, 60), st.integers(1, 12), st.integers(1, 12),
       st.integers(1, 5))
def test_window_count_formula(t, t_past, t_future, stride):
    v = np.zeros((2, 1, t), dtype=np.float32)
    if t < t_past + t_future:
        return
    ds = make_windows(v, t_past, t_future, stride=stride)
    assert len(ds) == (t - t_past - t_future) // stride + 1
    assert ds.x.shape == (len(ds), 2, t_past)
    assert ds.y.shape == (len(ds), 2, t_future)


@given(st.floats(0.0, 1e6, allow_nan=False))
def test_round_half_up_boundaries(x):
    r = round_half_up(x)
    assert isinstance(r, int)
    assert abs(r - x) <= 0.5
    if x - int(x) == 0.5:
        assert r == int(x) + 1


@settings(max_examples=25)
@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 8)),
                  elements=st.floats(-100, 100, allow_nan=False)),
       st.floats(0.1, 10, allow_nan=False))
def test_metric_scale_invariance(pred, scale):
    target = np.abs(pred) + 1.0  # strictly positive targets
    a = metrics(pred, target)
    b = metrics(pred * scale, target * scale)
    assert np.allclose(a.mape_per_step, b.mape_per_step, rtol=1e-9)
    assert np.allclose(a.mae_per_step * scale, b.mae_per_step, rtol=1e-9)
