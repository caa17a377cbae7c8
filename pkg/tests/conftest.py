import numpy as np
import pytest

import csmci


@pytest.fixture(scope="session")
def torus45():
    return csmci.build_torus(4, 5)


@pytest.fixture(scope="session")
def torus23():
    return csmci.build_torus(2, 3)


@pytest.fixture(scope="session")
def lattice12():
    return csmci.build_lattice_free(12, 12)


@pytest.fixture
def chain2():
    """Two vertices joined by one edge."""
    return csmci.Graph(2, [(0, 1)])


@pytest.fixture
def single_vertex():
    return csmci.Graph(1, [])


def random_small_graph(rng: np.random.Generator, n_max: int = 8) -> csmci.Graph:
    """Connected-ish random graph for oracle tests."""
    n = int(rng.integers(2, n_max + 1))
    edges = [(i, int(rng.integers(0, i))) for i in range(1, n)]  # random spanning tree
    extra = rng.random((n, n)) < 0.3
    edges += [(i, j) for i in range(n) for j in range(i + 1, n) if extra[i, j]]
    return csmci.Graph(n, edges)
