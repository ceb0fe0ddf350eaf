import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def gaussian_instance(seed, m, n, n1=None):
    """Gaussian data rows (m x n) plus uniform weights, reproducible by seed."""
    g = np.random.default_rng(seed)
    Xt = g.standard_normal((m, n))
    if n1 is None:
        w = g.uniform(-1.0, 1.0, size=n)
    else:
        w = g.uniform(-1.0, 1.0, size=(n, n1))
    return Xt, w
