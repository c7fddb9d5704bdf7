import numpy as np
import pytest

from rpmixer.tensor import SeededRng, randn


@pytest.fixture
def rng():
    return SeededRng(1234)


def finite_difference_grad(f, x, eps=1e-6):
    """Central-difference gradient of scalar f w.r.t. array x (in place probes)."""
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        fp = f()
        flat[i] = old - eps
        fm = f()
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * eps)
    return grad


def rel_err(a, b, floor=1e-8):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return np.max(np.abs(a - b) / denom)


def random_f64(rng, shape):
    return randn(rng, shape, dtype=np.float64)
