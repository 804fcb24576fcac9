import numpy as np
import pytest

from miniprob import demos


@pytest.fixture(scope="session")
def linear_data():
    return demos.simulate_linear_data(seed=1)


@pytest.fixture(scope="session")
def linear_model(linear_data):
    return demos.linear_model(linear_data)


@pytest.fixture(scope="session")
def disasters_model():
    return demos.disasters_model()


def finite_diff_grad(fn, x, h=1e-6):
    """Central-difference gradient of a scalar function of a vector."""
    x = np.asarray(x, dtype=np.float64)
    g = np.empty_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (fn(xp) - fn(xm)) / (2.0 * h)
    return g


def rel_err(a, b):
    """Error scaled by max(1, magnitude): tolerant where the value is tiny."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return np.max(np.abs(a - b) / scale)
