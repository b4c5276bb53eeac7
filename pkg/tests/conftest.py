import numpy as np
import pytest

from ductpinn.network import Architecture, flatten, init_params


@pytest.fixture
def tiny_arch():
    return Architecture.mlp(2, 6, 1, "sin")


@pytest.fixture
def tiny_theta(tiny_arch):
    return flatten(init_params(tiny_arch, seed=3))


def rel_close(a, b, rtol, floor=1.0):
    """|a - b| <= rtol * max(|b|, floor), elementwise."""
    a, b = np.asarray(a), np.asarray(b)
    return np.all(np.abs(a - b) <= rtol * np.maximum(np.abs(b), floor))
