"""
Rooted finite graphs with unit conductances and their cut-bond structure
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
import scipy.sparse as sp

from ..errors import StructuralError

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]


def _edge_key(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True, eq=False)
class RootedGraph:
    """Connected simple graph on vertices 0..n-1 with a root and optional Z^d locations"""

    graph: nx.Graph
    root: int
    locations: Optional[np.ndarray] = None

    def __post_init__(self):
        n = self.graph.number_of_nodes()
        if n == 0:
            raise StructuralError("Graph has no vertices")
        if set(self.graph.nodes) != set(range(n)):
            raise StructuralError("Vertices must be labelled 0..n-1")
        if not 0 <= self.root < n:
            raise StructuralError(f"Root {self.root} is not a vertex of a graph with {n} vertices")
        if nx.number_of_selfloops(self.graph) > 0:
            raise StructuralError("Self-loops are not allowed")
        if not nx.is_connected(self.graph):
            raise StructuralError("Graph is not connected")
        if self.locations is not None:
            locations = np.asarray(self.locations, dtype=np.int64)
            if locations.ndim != 2 or locations.shape[0] != n or locations.shape[1] < 1:
                raise StructuralError(f"Locations must have shape (n, d) with n={n}, got {locations.shape}")
            object.__setattr__(self, "locations", locations)
        if not nx.is_frozen(self.graph):
            object.__setattr__(self, "graph", nx.freeze(nx.Graph(self.graph)))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]], root: int = 0,
                   locations: Optional[np.ndarray] = None) -> "RootedGraph":
        """
        Build a rooted graph from an explicit edge list

        Args:
            n: Number of vertices
            edges: Iterable of (u, v) pairs
            root: Root vertex
            locations: Optional (n, d) integer array of lattice points

        Returns:
            Validated RootedGraph
        """
        graph = nx.Graph()
        graph.add_nodes_from(range(n))
        seen = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise StructuralError(f"Self-loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise StructuralError(f"Edge ({u}, {v}) references a vertex outside 0..{n - 1}")
            key = _edge_key(u, v)
            if key in seen:
                raise StructuralError(f"Parallel edge {key}")
            seen.add(key)
            graph.add_edge(u, v)
        return cls(graph=graph, root=int(root), locations=locations)

    # Basic counts

    @property
    def n_vertices(self) -> int:
        return self.graph.number_of_nodes()

    @property
    def n_edges(self) -> int:
        return self.graph.number_of_edges()

    @property
    def dimension(self) -> Optional[int]:
        return None if self.locations is None else int(self.locations.shape[1])

    @property
    def is_tree(self) -> bool:
        return self.n_edges == self.n_vertices - 1

    def edges(self) -> List[Edge]:
        """Edges as sorted pairs, sorted"""
        return sorted(_edge_key(u, v) for u, v in self.graph.edges)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Unit-conductance adjacency matrix in CSR form"""
        matrix = nx.to_scipy_sparse_array(self.graph, nodelist=range(self.n_vertices),
                                          dtype=float, format="csr")
        return sp.csr_matrix(matrix)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr).astype(np.int64)

    def neighbors(self, v: int) -> np.ndarray:
        start, stop = self.adjacency.indptr[v], self.adjacency.indptr[v + 1]
        return self.adjacency.indices[start:stop]

    # Graph metric

    def distances_from(self, source: int) -> np.ndarray:
        """Graph distances from source to every vertex"""
        lengths = nx.single_source_shortest_path_length(self.graph, source)
        distances = np.full(self.n_vertices, -1, dtype=np.int64)
        for v, d in lengths.items():
            distances[v] = d
        return distances

    @cached_property
    def root_distances(self) -> np.ndarray:
        return self.distances_from(self.root)

    def distance(self, u: int, v: int) -> int:
        if u == v:
            return 0
        return int(nx.shortest_path_length(self.graph, u, v))

    def diameter(self) -> int:
        """Exact graph diameter (double sweep on trees, all-pairs BFS otherwise)"""
        if self.n_vertices == 1:
            return 0
        if self.is_tree:
            first = self.distances_from(self.root)
            far = int(np.argmax(first))
            return int(self.distances_from(far).max())
        return int(nx.diameter(self.graph))

    def lattice_distance(self, u: int, v: int) -> int:
        """Z^d graph distance (L1) between the locations of u and v"""
        if self.locations is None:
            raise ValueError("Graph has no lattice locations")
        return int(np.abs(self.locations[u] - self.locations[v]).sum())

    # Derived graphs

    def with_extra_edges(self, extra: Iterable[Sequence[int]]) -> "RootedGraph":
        """Copy of this graph with the given edges inserted"""
        return RootedGraph.from_edges(self.n_vertices, list(self.edges()) + [tuple(e) for e in extra],
                                      root=self.root, locations=self.locations)

    @cached_property
    def network(self):
        """Factorized electrical network for repeated resistance queries"""
        from .electrical import ElectricalNetwork
        return ElectricalNetwork.from_graph(self)


@dataclass(frozen=True, eq=False)
class CutDecomposition:
    """Bridges of a rooted graph, their root-side cut-points and the bubbles they separate"""

    cut_bonds: Dict[Edge, int]
    cut_points: FrozenSet[int]
    bubbles: Tuple[FrozenSet[int], ...]
    bubble_of: np.ndarray
    last_cut: np.ndarray
    last_child: np.ndarray

    def is_cut_bond(self, u: int, v: int) -> bool:
        return _edge_key(u, v) in self.cut_bonds

    def bond_chain(self, v: int) -> List[Tuple[int, int]]:
        """
        Cut-bonds crossed by every path from the root to v, nearest to v first

        Returns:
            List of (cut_point, child) pairs
        """
        chain = []
        cut, child = int(self.last_cut[v]), int(self.last_child[v])
        while cut >= 0:
            chain.append((cut, child))
            cut, child = int(self.last_cut[cut]), int(self.last_child[cut])
        return chain

    def separating_cut_points(self, v: int) -> List[int]:
        """Cut-points separating v from the root, nearest to v first"""
        return [cut for cut, _ in self.bond_chain(v)]


def find_cut_decomposition(g: RootedGraph) -> CutDecomposition:
    """
    Find cut-bonds, cut-points and bubbles of a rooted graph

    Args:
        g: Connected rooted graph

    Returns:
        CutDecomposition with per-vertex attachment to the last bond crossed from the root
    """
    if not nx.is_connected(g.graph):
        raise StructuralError("Cut decomposition requires a connected graph")

    depth = g.root_distances
    cut_bonds = {}
    for u, v in nx.bridges(g.graph):
        cut = u if depth[u] < depth[v] else v
        cut_bonds[_edge_key(u, v)] = int(cut)

    # Bubbles are what remains after cutting every bond
    remainder = nx.Graph(g.graph)
    remainder.remove_edges_from(cut_bonds.keys())
    components = sorted((frozenset(c) for c in nx.connected_components(remainder)), key=min)
    bubble_of = np.empty(g.n_vertices, dtype=np.int64)
    for index, component in enumerate(components):
        bubble_of[list(component)] = index

    # Last bond crossed on the way from the root, propagated along BFS edges
    last_cut = np.full(g.n_vertices, -1, dtype=np.int64)
    last_child = np.full(g.n_vertices, -1, dtype=np.int64)
    for u, w in nx.bfs_edges(g.graph, g.root):
        if _edge_key(u, w) in cut_bonds:
            last_cut[w], last_child[w] = u, w
        else:
            last_cut[w], last_child[w] = last_cut[u], last_child[u]

    logger.debug("Cut decomposition: %d bonds, %d bubbles", len(cut_bonds), len(components))
    return CutDecomposition(
        cut_bonds=cut_bonds,
        cut_points=frozenset(cut_bonds.values()),
        bubbles=tuple(components),
        bubble_of=bubble_of,
        last_cut=last_cut,
        last_child=last_child,
    )


def write_edge_list(g: RootedGraph, path: Union[str, Path]) -> None:
    """Write a graph in the edge-list text format"""
    dimension = g.dimension or 1
    lines = [f"d {dimension} root {g.root}"]
    lines.extend(f"{u} {v}" for u, v in g.edges())
    if g.locations is not None:
        for v in range(g.n_vertices):
            coords = " ".join(str(int(x)) for x in g.locations[v])
            lines.append(f"loc {v} {coords}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path: Union[str, Path]) -> RootedGraph:
    """Read a graph written by write_edge_list"""
    lines = [line.split() for line in Path(path).read_text().splitlines() if line.strip()]
    if not lines or lines[0][0] != "d" or len(lines[0]) != 4 or lines[0][2] != "root":
        raise StructuralError(f"Missing 'd <dim> root <idx>' header in {path}")
    dimension, root = int(lines[0][1]), int(lines[0][3])

    edges, locs = [], {}
    for tokens in lines[1:]:
        if tokens[0] == "loc":
            if len(tokens) != dimension + 2:
                raise StructuralError(f"Location line has wrong arity: {' '.join(tokens)}")
            locs[int(tokens[1])] = [int(x) for x in tokens[2:]]
        elif len(tokens) == 2:
            edges.append((int(tokens[0]), int(tokens[1])))
        else:
            raise StructuralError(f"Unrecognised line: {' '.join(tokens)}")

    n = 1 + max([root] + [max(e) for e in edges] + list(locs.keys()))
    locations = None
    if locs:
        if len(locs) != n:
            raise StructuralError(f"Locations given for {len(locs)} of {n} vertices")
        locations = np.array([locs[v] for v in range(n)], dtype=np.int64)
    return RootedGraph.from_edges(n, edges, root=root, locations=locations)
