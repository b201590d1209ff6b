import numpy as np
import pytest

from tdbound.generator import GeneratorConfig, fifo_repair, generate_instance
from tdbound.tdgraph import TimeDependentGraph, TravelTimeFunction


def random_fifo_graph(rng, n, horizon=480.0, samples=5, coords=True):
    """Complete graph whose arcs are random piecewise-linear FIFO functions."""
    arcs = {}
    for i in range(n + 1):
        for j in range(n + 1):
            if i == j:
                continue
            inner = np.sort(rng.choice(np.arange(1, int(horizon)), size=samples - 2, replace=False))
            t = np.concatenate([[0.0], inner.astype(float), [horizon]])
            tau = fifo_repair(t, rng.uniform(5.0, 60.0, size=samples))
            arcs[i, j] = TravelTimeFunction(t, tau)
    xy = rng.uniform(0, 20, size=(n + 1, 2)) if coords else None
    return TimeDependentGraph(n, arcs, horizon, xy)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_instance():
    return generate_instance(GeneratorConfig(n=6, seed=5, perturbation=0.3))


@pytest.fixture(scope="session")
def perfect_instance():
    return generate_instance(GeneratorConfig(n=6, seed=5, perturbation=0.0))
