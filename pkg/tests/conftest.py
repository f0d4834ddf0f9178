import numpy as np
import pytest

from tests.graph_factories import bubble_chain, cycle_graph, path_graph


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def path3():
    return path_graph(3)


@pytest.fixture
def path4():
    return path_graph(4)


@pytest.fixture
def square():
    return cycle_graph(4)


@pytest.fixture
def triangle():
    return cycle_graph(3)


@pytest.fixture
def bubbles():
    return bubble_chain()
