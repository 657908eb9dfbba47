import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_bary(rng, n, d):
    """Uniform random points on the simplex as barycentric rows."""
    x = rng.exponential(size=(n, d + 1))
    return x / x.sum(axis=1, keepdims=True)
