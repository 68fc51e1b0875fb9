import numpy as np
import pytest

from gradcont.composition import order_conditions, symmetry_conditions
from gradcont.staged import build_staged_system
from gradcont.toys import toy2, toy3


def fd_jacobian(f, x, h=1e-6):
    """Central finite differences of a vector function."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.atleast_1d(f(x + e)) - np.atleast_1d(f(x - e))) / (2 * h))
    return np.array(cols).T


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.abs(a - b).max() / max(1.0, np.abs(b).max()))


@pytest.fixture(scope="session")
def bench31():
    return build_staged_system(order_conditions(31), symmetry_conditions(31))


@pytest.fixture(scope="session")
def small_bench():
    """Benchmark layout on 9 stages: cheap but structurally complete."""
    return build_staged_system(order_conditions(9), symmetry_conditions(9))


@pytest.fixture(params=["toy2", "toy3"])
def toy(request):
    return {"toy2": toy2, "toy3": toy3}[request.param]()
