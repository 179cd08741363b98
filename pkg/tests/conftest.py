import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def finite_difference(f, params, h=1e-4):
    """Fourth-order central differences of scalar f() w.r.t. each parameter."""
    grads = []
    for p in params:
        g = np.zeros_like(p.data)
        flat = p.data.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            vals = []
            for step in (-2 * h, -h, h, 2 * h):
                flat[i] = orig + step
                vals.append(f())
            flat[i] = orig
            gflat[i] = (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * h)
        grads.append(g)
    return grads


def assert_grads_close(analytic, numeric, rtol=1e-4, atol=1e-9):
    for a, n in zip(analytic, numeric):
        err = np.abs(a - n) - (atol + rtol * np.maximum(np.abs(a), np.abs(n)))
        assert err.max() <= 0, f"max grad mismatch beyond tolerance: {err.max():.2e}"
