"""
Small graph builders shared by the test modules
"""
import numpy as np

from src.graph_core import RootedGraph


def path_graph(n: int, root: int = 0, with_locations: bool = False) -> RootedGraph:
    locations = np.arange(n).reshape(-1, 1) if with_locations else None
    return RootedGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)], root=root, locations=locations)


def cycle_graph(n: int, root: int = 0) -> RootedGraph:
    return RootedGraph.from_edges(n, [(i, (i + 1) % n) for i in range(n)], root=root)


def random_connected_graph(n: int, extra_prob: float, rng: np.random.Generator, root: int = 0) -> RootedGraph:
    """Random recursive tree plus independent extra edges"""
    edges = {(int(rng.integers(v)), v) for v in range(1, n)}
    for u in range(n):
        for v in range(u + 2, n):
            if rng.random() < extra_prob:
                edges.add((u, v))
    cleaned = {(min(u, v), max(u, v)) for u, v in edges if u != v}
    return RootedGraph.from_edges(n, sorted(cleaned), root=root)


def random_tree(n: int, rng: np.random.Generator) -> RootedGraph:
    return RootedGraph.from_edges(n, [(int(rng.integers(v)), v) for v in range(1, n)], root=0)


def bubble_chain() -> RootedGraph:
    """
    Root 0 bonded to a 4-cycle 1-2-3-4, with pendant paths 2-5-7 and 4-6-8

        0 - 1 - 2 - 5 - 7
            |   |
            4 - 3
            |
            6 - 8
    """
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 1), (2, 5), (5, 7), (4, 6), (6, 8)]
    locations = np.array([[0, 0], [1, 0], [2, 0], [2, -1], [1, -1], [3, 0], [1, -2], [4, 0], [1, -3]])
    return RootedGraph.from_edges(9, edges, root=0, locations=locations)


def k4_bubble() -> RootedGraph:
    """Root 0 bonded to a 4-cycle whose other three vertices each carry a pendant path of length 2"""
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 1),
             (2, 5), (5, 6), (3, 7), (7, 8), (4, 9), (9, 10)]
    return RootedGraph.from_edges(11, edges, root=0)


def bubble_chain_with_entry_tail() -> RootedGraph:
    """
    bubble_chain plus a pendant path 1-9-10, so the bubble's entry vertex 1 is a cut-point

        0 - 1 - 2 - 5 - 7
           /|   |
      10-9  4 - 3
            |
            6 - 8
    """
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 1), (2, 5), (5, 7), (1, 9), (9, 10), (4, 6), (6, 8)]
    return RootedGraph.from_edges(11, edges, root=0)
