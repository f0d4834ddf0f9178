"""
Generators of critical random augmented graphs: conditioned Galton-Watson trees,
branching-random-walk traces in Z^d and mark sampling
"""
import logging
from dataclasses import asdict, dataclass
from typing import Dict, List

import networkx as nx
import numpy as np
from scipy import stats

from ..errors import ConfigError, StructuralError
from ..graph_core import CutDecomposition, RootedGraph

logger = logging.getLogger(__name__)

FAMILIES = ("gw_tree", "brw_trace", "path")
MARK_LAWS = ("uniform_cut_points", "uniform_vertices_projected")


class OffspringLaw:
    """Critical offspring distribution with an exact sum-conditioned sampler"""

    BUILT_IN = {
        "geometric": lambda: stats.geom(p=0.5, loc=-1),
        "poisson": lambda: stats.poisson(mu=1.0),
        "binary": lambda: stats.rv_discrete(values=([0, 2], [0.5, 0.5])),
    }

    def __init__(self, name: str = "geometric"):
        if name not in self.BUILT_IN:
            raise ValueError(f"Unsupported offspring law: {name}. Choose from {sorted(self.BUILT_IN)}")
        self.name = name
        self.distribution = self.BUILT_IN[name]()
        if not np.isclose(self.distribution.mean(), 1.0):
            raise ValueError(f"Offspring law {name} is not critical (mean {self.distribution.mean()})")

    @property
    def variance(self) -> float:
        return float(self.distribution.var())

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.asarray(self.distribution.rvs(size=size, random_state=rng), dtype=np.int64)

    def sample_with_sum(self, rng: np.random.Generator, size: int, total: int) -> np.ndarray:
        """
        i.i.d. offspring counts conditioned on their sum

        Geometric counts given the sum are a uniform weak composition,
        Poisson counts are multinomial and binary counts pick the parents
        uniformly.
        """
        if self.name == "geometric":
            if total == 0:
                return np.zeros(size, dtype=np.int64)
            slots = total + size - 1
            bars = np.sort(rng.choice(slots, size=size - 1, replace=False))
            return (np.diff(np.concatenate(([-1], bars, [slots]))) - 1).astype(np.int64)
        if self.name == "poisson":
            return rng.multinomial(total, np.full(size, 1.0 / size)).astype(np.int64)
        if total % 2:
            raise ValueError(f"Binary offspring cannot sum to odd total {total}")
        counts = np.zeros(size, dtype=np.int64)
        counts[rng.choice(size, size=total // 2, replace=False)] = 2
        return counts


def _tree_from_lukasiewicz(counts: np.ndarray) -> List[tuple]:
    """Edges of the plane tree whose depth-first child counts are given"""
    edges = []
    stack: List[List[int]] = []
    for v, children in enumerate(counts):
        if stack:
            parent = stack[-1]
            edges.append((parent[0], v))
            parent[1] -= 1
            if parent[1] == 0:
                stack.pop()
        if children > 0:
            stack.append([v, int(children)])
    return edges


def gen_gw_tree(n: int, offspring: OffspringLaw, rng: np.random.Generator,
                method: str = "cycle") -> RootedGraph:
    """
    Galton-Watson tree conditioned to have exactly n vertices

    Args:
        n: Number of vertices
        offspring: Critical offspring law
        rng: Random generator
        method: "cycle" (cycle-lemma rotation) or "rejection" (resample until size n)

    Returns:
        Plane tree rooted at vertex 0, vertices labelled in depth-first order
    """
    if n < 1:
        raise ValueError(f"Tree size must be positive, got {n}")
    if offspring.name == "binary" and n % 2 == 0:
        raise ValueError(f"Binary trees have an odd number of vertices, got {n}")

    if method == "cycle":
        counts = offspring.sample_with_sum(rng, n, n - 1)
        walk = np.cumsum(counts - 1)
        start = int(np.argmin(walk)) + 1
        counts = np.roll(counts, -start)
    elif method == "rejection":
        while True:
            counts = offspring.sample(rng, n)
            walk = np.cumsum(counts - 1)
            if walk[-1] == -1 and (n == 1 or walk[:-1].min() >= 0):
                break
    else:
        raise ValueError(f"Unknown method: {method}")

    return RootedGraph.from_edges(n, _tree_from_lukasiewicz(counts), root=0)


def gen_brw_trace(tree: RootedGraph, d: int, rng: np.random.Generator) -> RootedGraph:
    """
    Trace in Z^d of a branching random walk indexed by a tree

    Args:
        tree: Indexing tree
        d: Lattice dimension
        rng: Random generator

    Returns:
        Simple graph of visited lattice points and traversed lattice edges, rooted at the origin
    """
    if d < 1:
        raise ValueError(f"Dimension must be positive, got {d}")
    n = tree.n_vertices
    parent = np.full(n, -1, dtype=np.int64)
    order = [tree.root]
    for u, w in nx.bfs_edges(tree.graph, tree.root):
        parent[w] = u
        order.append(w)

    steps = np.zeros((n, d), dtype=np.int64)
    axes = rng.integers(0, d, size=n)
    signs = 2 * rng.integers(0, 2, size=n) - 1
    steps[np.arange(n), axes] = signs

    positions = np.zeros((n, d), dtype=np.int64)
    for v in order[1:]:
        positions[v] = positions[parent[v]] + steps[v]

    points, labels = np.unique(positions, axis=0, return_inverse=True)
    labels = labels.ravel()
    children = np.array(order[1:], dtype=np.int64)
    pairs = np.sort(np.stack([labels[parent[children]], labels[children]], axis=1), axis=1)
    edges = np.unique(pairs, axis=0) if len(pairs) else np.empty((0, 2), dtype=np.int64)

    logger.debug("BRW trace: %d tree vertices -> %d lattice points", n, len(points))
    return RootedGraph.from_edges(len(points), edges.tolist(), root=int(labels[tree.root]), locations=points)


def gen_path_control(n: int) -> RootedGraph:
    """Line graph of n vertices in Z, rooted at its centre"""
    if n < 1:
        raise ValueError(f"Path size must be positive, got {n}")
    locations = (np.arange(n) - n // 2).reshape(-1, 1)
    return RootedGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)], root=n // 2, locations=locations)


def add_shortcut_edges(g: RootedGraph, count: int, rng: np.random.Generator) -> RootedGraph:
    """Insert count uniformly chosen non-edges"""
    if count <= 0:
        return g
    n = g.n_vertices
    max_new = n * (n - 1) // 2 - g.n_edges
    if count > max_new:
        raise ValueError(f"Cannot add {count} edges, only {max_new} non-edges exist")
    added = set()
    while len(added) < count:
        u, v = (int(x) for x in rng.integers(0, n, size=2))
        key = (min(u, v), max(u, v))
        if u != v and not g.graph.has_edge(u, v) and key not in added:
            added.add(key)
    return g.with_extra_edges(sorted(added))


@dataclass(frozen=True)
class ModelSpec:
    """Law of the random augmented graph"""

    family: str = "gw_tree"
    n: int = 1000
    offspring: str = "geometric"
    dimension: int = 14
    mark_law: str = "uniform_cut_points"
    extra_edges: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"Unknown model family: {self.family}")
        if self.mark_law not in MARK_LAWS:
            raise ConfigError(f"Unknown mark law: {self.mark_law}")
        if self.n < 1 or self.dimension < 1 or self.extra_edges < 0:
            raise ConfigError(f"Model sizes must be positive: n={self.n}, d={self.dimension}")
        try:
            OffspringLaw(self.offspring)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def offspring_law(self) -> OffspringLaw:
        return OffspringLaw(self.offspring)

    def with_size(self, n: int) -> "ModelSpec":
        return ModelSpec(**{**asdict(self), "n": int(n)})

    def generate(self, rng: np.random.Generator) -> RootedGraph:
        """Sample one graph of this model"""
        if self.family == "path":
            return gen_path_control(self.n)
        tree = gen_gw_tree(self.n, self.offspring_law, rng)
        if self.family == "brw_trace":
            return gen_brw_trace(tree, self.dimension, rng)
        return add_shortcut_edges(tree, self.extra_edges, rng)

    def to_dict(self) -> Dict:
        return asdict(self)


def sample_marks(g: RootedGraph, cuts: CutDecomposition, count: int, law: str,
                 rng: np.random.Generator) -> List[int]:
    """
    i.i.d. marks supported on cut-points

    Args:
        g: Rooted graph
        cuts: Its cut decomposition
        count: Number of marks
        law: "uniform_cut_points" or "uniform_vertices_projected"; the latter
            draws uniform vertices and maps each to the last cut-point
            separating it from the root, or to the root when none does. If
            the root is not a cut-point itself, the draw is conditioned on
            leaving the root bubble
        rng: Random generator

    Returns:
        List of cut-point marks (with possible repeats)
    """
    if count < 0:
        raise ValueError(f"Mark count must be non-negative, got {count}")
    if count == 0:
        return []
    if not cuts.cut_points:
        raise StructuralError("Graph has no cut-points to mark")

    if law == "uniform_cut_points":
        support = np.array(sorted(cuts.cut_points), dtype=np.int64)
        return [int(x) for x in rng.choice(support, size=count, replace=True)]
    if law == "uniform_vertices_projected":
        projected = np.where(cuts.last_cut >= 0, cuts.last_cut, g.root)
        eligible = np.flatnonzero(np.isin(projected, list(cuts.cut_points)))
        vertices = rng.choice(eligible, size=count, replace=True)
        return [int(projected[v]) for v in vertices]
    raise ValueError(f"Unknown mark law: {law}")
