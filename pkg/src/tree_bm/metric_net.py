"""
Metric trees discretized into nearest-neighbour lattices for Brownian motion
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from ..errors import StructuralError
from ..skeleton import ReducedSpatialTree, SkeletonTree, reduce_tree

logger = logging.getLogger(__name__)

LENGTH, RESISTANCE = "length", "resistance"
METRICS = (LENGTH, RESISTANCE)
DEFAULT_PIECES_PER_EDGE = 8
OFFSET_TOL = 1e-9

SourceTree = Union[SkeletonTree, ReducedSpatialTree]


@dataclass(frozen=True)
class SourceEdges:
    """Original tree flattened to parent -> child edges"""

    vertices: Tuple[int, ...]
    root: int
    edges: Tuple[Tuple[int, int], ...]
    lengths: np.ndarray
    resistances: Optional[np.ndarray]
    positions: Optional[Dict[int, np.ndarray]]
    star_centers: frozenset = frozenset()

    def values(self, metric: str) -> np.ndarray:
        if metric == LENGTH:
            return self.lengths
        if metric == RESISTANCE:
            if self.resistances is None:
                raise ValueError("Tree carries no edge resistances")
            return self.resistances
        raise ValueError(f"Unknown metric '{metric}', expected one of {METRICS}")


def source_edges(tree: SourceTree) -> SourceEdges:
    """Flatten a skeleton or reduced tree, edges oriented away from its root"""
    if isinstance(tree, SkeletonTree):
        vertices = tuple(tree.vertices())
        edges = tuple((p, v) for v, p in sorted(tree.parent.items()) if p >= 0)
        data = [tree.edge_data(p, v) for p, v in edges]
        return SourceEdges(
            vertices=vertices, root=tree.root_star, edges=edges,
            lengths=np.array([d["length"] for d in data], dtype=float),
            resistances=np.array([d["resistance"] for d in data], dtype=float),
            positions=None if tree.embedding is None else {v: np.asarray(x, float) for v, x in tree.embedding.items()},
            star_centers=frozenset(tree.star_centers),
        )
    if isinstance(tree, ReducedSpatialTree):
        edges = tuple(tree.edges())
        children = [v for _, v in edges]
        return SourceEdges(
            vertices=tuple(range(tree.n_vertices)), root=0, edges=edges,
            lengths=np.asarray(tree.lengths, dtype=float)[children],
            resistances=None if tree.resistances is None else np.asarray(tree.resistances, dtype=float)[children],
            positions=None if tree.positions is None else {v: tree.positions[v] for v in range(tree.n_vertices)},
        )
    raise TypeError(f"Expected SkeletonTree or ReducedSpatialTree, got {type(tree).__name__}")


@dataclass(frozen=True, eq=False)
class MetricTreeNet:
    """
    Subdivided tree: original vertices are sites 0..V-1 (in vertex order),
    interior sites follow edge by edge from the parent end

    ``site_edge[s]`` is the original edge index of an interior site (-1 for
    vertex sites) and ``site_offset[s]`` its metric distance from the parent
    end of that edge. ``weights`` is the site measure.
    """

    source: SourceTree
    metric: str
    h: float
    tree: SourceEdges
    edge_values: np.ndarray
    edge_pieces: np.ndarray
    site_edge: np.ndarray
    site_offset: np.ndarray
    conductances: sp.csr_matrix
    weights: np.ndarray
    positions: Optional[np.ndarray] = None

    @property
    def n_sites(self) -> int:
        return len(self.site_edge)

    @property
    def n_vertices(self) -> int:
        return len(self.tree.vertices)

    @property
    def n_pieces(self) -> int:
        return int(self.edge_pieces.sum())

    @property
    def edges(self) -> Tuple[Tuple[int, int], ...]:
        return self.tree.edges

    @property
    def piece_values(self) -> np.ndarray:
        """Metric length of a single piece on each original edge"""
        return self.edge_values / self.edge_pieces

    @property
    def root_site(self) -> int:
        return self.vertex_site(self.tree.root)

    @property
    def total_measure(self) -> float:
        return float(self.weights.sum())

    @cached_property
    def _vertex_index(self) -> Dict[int, int]:
        return {v: i for i, v in enumerate(self.tree.vertices)}

    @cached_property
    def _edge_index(self) -> Dict[Tuple[int, int], int]:
        return {e: i for i, e in enumerate(self.tree.edges)}

    def vertex_site(self, v: int) -> int:
        try:
            return self._vertex_index[v]
        except KeyError:
            raise ValueError(f"{v} is not a vertex of the source tree") from None

    def site_vertex(self, site: int) -> Optional[int]:
        return self.tree.vertices[site] if site < self.n_vertices else None

    def edge_index(self, u: int, v: int) -> int:
        """Index of the original edge {u, v}"""
        key = (u, v) if (u, v) in self._edge_index else (v, u)
        if key not in self._edge_index:
            raise ValueError(f"({u}, {v}) is not an edge of the source tree")
        return self._edge_index[key]

    def site_on_edge(self, u: int, v: int, offset: float) -> int:
        """Site at metric distance ``offset`` from u along the edge {u, v}"""
        e = self.edge_index(u, v)
        parent, child = self.tree.edges[e]
        along = offset if u == parent else self.edge_values[e] - offset
        if abs(along) <= OFFSET_TOL:
            return self.vertex_site(parent)
        if abs(along - self.edge_values[e]) <= OFFSET_TOL:
            return self.vertex_site(child)
        candidates = np.flatnonzero((self.site_edge == e) & (np.abs(self.site_offset - along) <= OFFSET_TOL))
        if len(candidates) == 0:
            raise ValueError(f"No site at offset {offset} on edge ({u}, {v}); piece length is {self.piece_values[e]}")
        return int(candidates[0])

    def edge_sites(self, e: int) -> np.ndarray:
        """Sites along edge e from the parent end to the child end"""
        parent, child = self.tree.edges[e]
        interior = np.flatnonzero(self.site_edge == e)
        interior = interior[np.argsort(self.site_offset[interior])]
        return np.concatenate(([self.vertex_site(parent)], interior, [self.vertex_site(child)]))

    # Walk tables

    @cached_property
    def total_conductance(self) -> np.ndarray:
        return np.asarray(self.conductances.sum(axis=1)).ravel()

    @cached_property
    def hold_times(self) -> np.ndarray:
        """Clock advance per visit: 2 * site weight / total conductance (piece length squared for raw Lebesgue weights)"""
        return 2.0 * self.weights / self.total_conductance

    @cached_property
    def jump_table(self) -> Tuple[np.ndarray, np.ndarray]:
        """Padded neighbour matrix and cumulative jump probabilities, one row per site"""
        csr = self.conductances
        degrees = np.diff(csr.indptr)
        width = int(degrees.max()) if len(degrees) else 1
        neighbours = np.full((self.n_sites, width), -1, dtype=np.int64)
        cumulative = np.full((self.n_sites, width), 2.0)
        for s in range(self.n_sites):
            lo, hi = csr.indptr[s], csr.indptr[s + 1]
            weights = csr.data[lo:hi]
            neighbours[s, :hi - lo] = csr.indices[lo:hi]
            cum = np.cumsum(weights) / weights.sum()
            cum[-1] = 1.0
            cumulative[s, :hi - lo] = cum
        return neighbours, cumulative

    def step(self, sites: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
        """Next sites for current sites given uniform draws in [0, 1)"""
        neighbours, cumulative = self.jump_table
        choice = (cumulative[sites] <= uniforms[:, None]).sum(axis=1)
        return neighbours[sites, choice]

    # Metric

    @cached_property
    def _piece_graph(self) -> sp.csr_matrix:
        lengths = self.conductances.copy()
        lengths.data = 1.0 / lengths.data
        return lengths

    def site_distances(self, sources: Sequence[int]) -> np.ndarray:
        """Metric distances from each source site to every site, one row per source"""
        return dijkstra(self._piece_graph, directed=False, indices=list(sources))

    @cached_property
    def vertex_tree(self) -> nx.Graph:
        """Original tree as a networkx graph on vertex sites"""
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n_vertices))
        for e, (u, v) in enumerate(self.tree.edges):
            graph.add_edge(self.vertex_site(u), self.vertex_site(v), edge=e)
        return graph

    def site_table(self) -> pd.DataFrame:
        rows = []
        for s in range(self.n_sites):
            row = {
                "site": s,
                "vertex": -1 if s >= self.n_vertices else int(self.tree.vertices[s]),
                "edge": int(self.site_edge[s]),
                "offset": float(self.site_offset[s]),
                "weight": float(self.weights[s]),
            }
            if self.positions is not None:
                for axis, value in enumerate(self.positions[s]):
                    row[f"coord_{axis + 1}"] = float(value)
            rows.append(row)
        return pd.DataFrame(rows)


def _piece_counts(values: np.ndarray, h: float) -> np.ndarray:
    return np.maximum(1, np.ceil(values / h - 1e-12)).astype(np.int64)


def _measure_values(tree: SourceTree, edges: SourceEdges, measure) -> Tuple[np.ndarray, Optional[Dict[int, float]]]:
    """Per-edge Lebesgue mass, or vertex atoms"""
    if isinstance(measure, str):
        if measure == "lebesgue":
            return edges.lengths, None
        if measure == RESISTANCE:
            return edges.values(RESISTANCE), None
        if measure == "projected":
            if not isinstance(tree, SkeletonTree) or not tree.measure:
                raise ValueError("Projected measure needs a SkeletonTree with a projected measure")
            return np.zeros(len(edges.edges)), {v: float(m) for v, m in tree.measure.items()}
        raise ValueError(f"Unknown measure '{measure}', expected lebesgue, resistance, projected or a mapping")
    if isinstance(measure, Mapping):
        atoms = {int(v): float(m) for v, m in measure.items()}
        unknown = set(atoms) - set(edges.vertices)
        if unknown:
            raise ValueError(f"Measure atoms on unknown vertices {sorted(unknown)}")
        if any(m < 0 for m in atoms.values()):
            raise ValueError("Measure atoms must be non-negative")
        return np.zeros(len(edges.edges)), atoms
    raise ValueError(f"Unsupported measure specification {measure!r}")


def discretize(tree: SourceTree, metric: str = LENGTH, h: Optional[float] = None,
               measure: Union[str, Mapping[int, float]] = "lebesgue", normalize: bool = True) -> MetricTreeNet:
    """
    Subdivide every edge into pieces of metric length in [h/2, h]

    Args:
        tree: SkeletonTree or ReducedSpatialTree
        metric: 'length' or 'resistance'; the walk moves in this metric
        h: Step; defaults to the shortest edge over DEFAULT_PIECES_PER_EDGE
        measure: 'lebesgue' (edge lengths), 'resistance' (edge resistances),
            'projected' (the skeleton's projected volume) or a {vertex: mass} mapping
        normalize: Rescale the measure to total mass 1

    Returns:
        MetricTreeNet
    """
    edges = source_edges(tree)
    if not edges.edges:
        raise StructuralError("Tree has no edges to discretize")
    values = np.asarray(edges.values(metric), dtype=float)
    shortest = float(values.min())
    if h is None:
        h = shortest / DEFAULT_PIECES_PER_EDGE
    if h <= 0:
        raise ValueError(f"Step h must be positive, got {h}")
    if h >= shortest:
        raise StructuralError(f"Step h={h} is not below the shortest edge ({metric}={shortest})")

    pieces = _piece_counts(values, h)
    n_vertices = len(edges.vertices)
    index = {v: i for i, v in enumerate(edges.vertices)}
    site_edge: List[int] = [-1] * n_vertices
    site_offset: List[float] = [0.0] * n_vertices
    rows, cols, conductance = [], [], []
    measure_mass, atoms = _measure_values(tree, edges, measure)
    weights: List[float] = [0.0] * n_vertices

    for e, ((parent, child), value, k) in enumerate(zip(edges.edges, values, pieces)):
        chain = [index[parent]]
        for j in range(1, k):
            site_edge.append(e)
            site_offset.append(value * j / k)
            weights.append(0.0)
            chain.append(len(site_edge) - 1)
        chain.append(index[child])
        piece_mass = measure_mass[e] / k
        for a, b in zip(chain[:-1], chain[1:]):
            rows.extend((a, b))
            cols.extend((b, a))
            conductance.extend((k / value, k / value))
            weights[a] += 0.5 * piece_mass
            weights[b] += 0.5 * piece_mass

    weights = np.asarray(weights)
    if atoms is not None:
        for v, mass in atoms.items():
            weights[index[v]] += mass
    total = weights.sum()
    if total <= 0:
        raise ValueError("Measure has zero total mass")
    if normalize:
        weights = weights / total

    n_sites = len(site_edge)
    conductances = sp.csr_matrix((conductance, (rows, cols)), shape=(n_sites, n_sites))
    site_edge = np.asarray(site_edge, dtype=np.int64)
    site_offset = np.asarray(site_offset)

    positions = None
    if edges.positions is not None:
        dim = len(next(iter(edges.positions.values())))
        positions = np.zeros((n_sites, dim))
        for v, i in index.items():
            positions[i] = edges.positions[v]
        interior = np.flatnonzero(site_edge >= 0)
        for s in interior:
            parent, child = edges.edges[site_edge[s]]
            fraction = site_offset[s] / values[site_edge[s]]
            positions[s] = (1.0 - fraction) * edges.positions[parent] + fraction * edges.positions[child]

    logger.debug("Discretized %d edges into %d pieces (%s metric, h=%.4g)", len(values), pieces.sum(), metric, h)
    return MetricTreeNet(
        source=tree, metric=metric, h=float(h), tree=edges, edge_values=values, edge_pieces=pieces,
        site_edge=site_edge, site_offset=site_offset, conductances=conductances, weights=weights,
        positions=positions,
    )


def segment_tree(length: float, resistance: Optional[float] = None) -> ReducedSpatialTree:
    """Root joined to one mark by a single edge"""
    return star_tree([length], None if resistance is None else [resistance])


def star_tree(arms: Iterable[float], resistances: Optional[Iterable[float]] = None) -> ReducedSpatialTree:
    """Root joined to one mark per arm; a single arm gives a segment with the root at one end"""
    arms = [float(a) for a in arms]
    labels = [f"leaf{i}" for i in range(len(arms))]
    parent = {"hub": None, **{label: "hub" for label in labels}}
    lengths = {"hub": 0.0, **dict(zip(labels, arms))}
    res = None
    if resistances is not None:
        res = {"hub": 0.0, **dict(zip(labels, (float(r) for r in resistances)))}
    return reduce_tree(parent, labels, lengths, res)
