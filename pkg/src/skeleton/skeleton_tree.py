"""
Skeleton tree: star-triangle expansion of G(K) carrying lengths, resistances,
a spatial embedding and the projected volume measure
"""
import json
import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Set, Tuple, Union

import networkx as nx
import numpy as np
from scipy.sparse.csgraph import shortest_path
from scipy.spatial.distance import cdist

from ..errors import StructuralError
from ..graph_core import CutDecomposition, RootedGraph, effective_resistance, triangle_arm_conductances
from .selected_graph import SelectedSkeletonGraph, is_asymptotically_tree_like

logger = logging.getLogger(__name__)

BOND, ARM = "bond", "arm"


@dataclass(frozen=True, eq=False)
class SkeletonTree:
    """
    Tree on the selected cut-points V* and one star center per triangle

    Cut-points keep their vertex index in the underlying graph; star centers
    are numbered from n_graph_vertices upwards. Edges carry ``length``,
    ``resistance`` and ``kind`` (bond for E*, arm for star arms).
    """

    graph: nx.Graph
    root_star: int
    vstar: FrozenSet[int]
    star_centers: Dict[int, Tuple[int, int, int]]
    embedding: Optional[Dict[int, np.ndarray]]
    cuts: CutDecomposition
    n_graph_vertices: int
    n_graph_edges: int
    measure: Dict[int, int] = field(default_factory=dict)

    @property
    def n_vertices(self) -> int:
        return self.graph.number_of_nodes()

    def vertices(self) -> List[int]:
        return sorted(self.graph.nodes)

    def is_star_center(self, v: int) -> bool:
        return v in self.star_centers

    def edge_data(self, u: int, v: int) -> Dict:
        return self.graph.edges[u, v]

    # Ancestry

    @cached_property
    def parent(self) -> Dict[int, int]:
        parent = {self.root_star: -1}
        for u, w in nx.bfs_edges(self.graph, self.root_star):
            parent[w] = u
        return parent

    @cached_property
    def _depths(self) -> Dict[str, Dict[int, float]]:
        hops, length, resistance = {self.root_star: 0}, {self.root_star: 0.0}, {self.root_star: 0.0}
        for u, w in nx.bfs_edges(self.graph, self.root_star):
            data = self.graph.edges[u, w]
            hops[w] = hops[u] + 1
            length[w] = length[u] + data["length"]
            resistance[w] = resistance[u] + data["resistance"]
        return {"hops": hops, "length": length, "resistance": resistance}

    def children(self, v: int) -> List[int]:
        return sorted(w for w in self.graph.neighbors(v) if self.parent[w] == v)

    def ancestors(self, v: int) -> List[int]:
        """Path from v up to root*, v first"""
        chain = [v]
        while self.parent[chain[-1]] >= 0:
            chain.append(self.parent[chain[-1]])
        return chain

    def precedes(self, a: int, b: int) -> bool:
        """Ancestry order: a lies on the path from root* to b (a precedes b, or a == b)"""
        return a in self.ancestors(b)

    def descendants(self, v: int) -> Set[int]:
        """Descendants of v including v"""
        found, stack = {v}, [v]
        while stack:
            for w in self.children(stack.pop()):
                found.add(w)
                stack.append(w)
        return found

    def lowest_common_ancestor(self, a: int, b: int) -> int:
        hops = self._depths["hops"]
        while hops[a] > hops[b]:
            a = self.parent[a]
        while hops[b] > hops[a]:
            b = self.parent[b]
        while a != b:
            a, b = self.parent[a], self.parent[b]
        return a

    def path(self, a: int, b: int) -> List[int]:
        """Vertices on the unique tree path from a to b"""
        top = self.lowest_common_ancestor(a, b)
        up = self.ancestors(a)
        down = self.ancestors(b)
        return up[:up.index(top) + 1] + down[:down.index(top)][::-1]

    # Metrics

    def distance(self, a: int, b: int) -> float:
        """Tree distance in graph-distance units"""
        depth = self._depths["length"]
        return depth[a] + depth[b] - 2.0 * depth[self.lowest_common_ancestor(a, b)]

    def resistance(self, a: int, b: int) -> float:
        """Series resistance along the tree path"""
        depth = self._depths["resistance"]
        return depth[a] + depth[b] - 2.0 * depth[self.lowest_common_ancestor(a, b)]

    def total_length(self) -> float:
        return float(sum(d["length"] for _, _, d in self.graph.edges(data=True)))

    def total_resistance(self) -> float:
        return float(sum(d["resistance"] for _, _, d in self.graph.edges(data=True)))

    def subtree_length(self, v: int) -> float:
        """Lebesgue length of the descendants of v"""
        below = self.descendants(v)
        return float(sum(self.graph.edges[self.parent[w], w]["length"] for w in below if w != v))

    def subtree_resistance(self, v: int) -> float:
        below = self.descendants(v)
        return float(sum(self.graph.edges[self.parent[w], w]["resistance"] for w in below if w != v))

    def subtree_measure(self, v: int) -> int:
        return int(sum(self.measure.get(w, 0) for w in self.descendants(v)))

    def position(self, v: int) -> np.ndarray:
        if self.embedding is None:
            raise ValueError("Skeleton has no spatial embedding")
        return self.embedding[v]

    def point_on_edge(self, u: int, v: int, fraction: float) -> np.ndarray:
        """Linear interpolation of the embedding along edge (u, v)"""
        if not 0.0 <= fraction <= 1.0:
            raise ValueError(f"Fraction must lie in [0, 1], got {fraction}")
        return (1.0 - fraction) * self.position(u) + fraction * self.position(v)

    # Serialization

    def to_dict(self) -> Dict:
        vertices = []
        for v in self.vertices():
            entry = {"id": int(v), "kind": "star" if self.is_star_center(v) else "cut",
                     "measure": int(self.measure.get(v, 0))}
            if self.is_star_center(v):
                entry["triangle"] = [int(x) for x in self.star_centers[v]]
            if self.embedding is not None:
                entry["position"] = [float(x) for x in self.embedding[v]]
            vertices.append(entry)
        edges = [
            {"u": int(u), "v": int(v), "len": float(d["length"]), "res": float(d["resistance"]), "kind": d["kind"]}
            for u, v, d in sorted(self.graph.edges(data=True), key=lambda e: (min(e[:2]), max(e[:2])))
        ]
        return {"root_star": int(self.root_star), "vertices": vertices, "edges": edges,
                "n_graph_vertices": self.n_graph_vertices, "n_graph_edges": self.n_graph_edges}

    def to_json(self, path: Optional[Union[str, Path]] = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text


def _gromov_arms(g: RootedGraph, x: int, y: int, z: int) -> Tuple[float, float, float]:
    d_xy, d_yz, d_zx = g.distance(x, y), g.distance(y, z), g.distance(z, x)
    arms = ((d_xy + d_zx - d_yz) / 2.0, (d_xy + d_yz - d_zx) / 2.0, (d_zx + d_yz - d_xy) / 2.0)
    if min(arms) < 0:
        raise StructuralError(f"Negative Gromov product for triangle ({x}, {y}, {z}): {arms}")
    return arms


def expand_star_triangle(g: RootedGraph, sk: SelectedSkeletonGraph) -> SkeletonTree:
    """
    Replace every triangle of G(K) by a star and attach lengths, resistances and measure

    Args:
        g: Rooted graph G(K) was built from
        sk: Tree-like selected skeleton graph

    Returns:
        SkeletonTree with the projected volume measure attached
    """
    if not is_asymptotically_tree_like(sk):
        sizes = sorted(sk.clique_sizes().values(), reverse=True)
        raise StructuralError(f"G(K) is not asymptotically tree-like (largest cliques {sizes[:3]})")
    if not sk.is_block_tree():
        raise StructuralError("G(K) has a cycle through several cliques")

    tree = nx.Graph()
    tree.add_nodes_from(sorted(sk.vertices))
    star_centers = {}

    for members in sk.cliques.values():
        corners = sorted(members)
        if len(corners) == 2:
            x, y = corners
            tree.add_edge(x, y, length=float(g.distance(x, y)),
                          resistance=float(effective_resistance(g, x, y)), kind=BOND)
            continue

        x, y, z = corners
        center = g.n_vertices + len(star_centers)
        star_centers[center] = (x, y, z)
        lengths = _gromov_arms(g, x, y, z)
        resistances = triangle_arm_conductances(g, x, y, z).star_arms()
        for corner, length, resistance in zip(corners, lengths, resistances):
            tree.add_edge(corner, center, length=float(length), resistance=float(resistance), kind=ARM)

    if not nx.is_tree(tree):
        raise StructuralError("Star-triangle expansion did not produce a tree")

    embedding = None
    if g.locations is not None:
        embedding = {v: g.locations[v].astype(float) for v in sk.vertices}
        for center, corners in star_centers.items():
            embedding[center] = g.locations[list(corners)].mean(axis=0)

    skeleton = SkeletonTree(
        graph=nx.freeze(tree),
        root_star=sk.root_star,
        vstar=sk.vertices,
        star_centers=star_centers,
        embedding=embedding,
        cuts=sk.cuts,
        n_graph_vertices=g.n_vertices,
        n_graph_edges=g.n_edges,
    )
    logger.debug("Skeleton tree: %d cut-points, %d star centers", len(sk.vertices), len(star_centers))
    return replace(skeleton, measure=project_measure(g, skeleton))


def sausage_labels(g: RootedGraph, tree: SkeletonTree) -> np.ndarray:
    """
    Projection onto V*: the last selected cut-point crossed from the root

    Vertices not separated from the root by any selected cut-point map to root*.
    """
    labels = np.full(g.n_vertices, -1, dtype=np.int64)
    labels[g.root] = tree.root_star
    for u, w in nx.bfs_edges(g.graph, g.root):
        if tree.cuts.is_cut_bond(u, w) and u in tree.vstar:
            labels[w] = u
        else:
            labels[w] = labels[u]
    return labels


def project_measure(g: RootedGraph, tree: SkeletonTree) -> Dict[int, int]:
    """
    Volume measure v(x) on V*

    v(x) counts ordered incidences (y, z), y ~ z, with y projecting to x and y != x.

    Returns:
        Mapping from every x in V* to v(x)
    """
    labels = sausage_labels(g, tree)
    degrees = g.degrees
    measure = {int(x): 0 for x in tree.vstar}
    own = labels != np.arange(g.n_vertices)
    counts = np.bincount(labels[own], weights=degrees[own], minlength=g.n_vertices)
    for x in measure:
        measure[x] = int(counts[x])
    return measure


def _l1_diameter(points: np.ndarray) -> float:
    """Max pairwise L1 distance, by sign patterns or pairwise blocks, whichever is cheaper"""
    if len(points) < 2:
        return 0.0
    d = points.shape[1]
    if 2 ** (d - 1) < len(points):
        signs = np.array(np.meshgrid(*[[1, -1]] * d, indexing="ij")).reshape(d, -1).T
        signs = signs[signs[:, 0] == 1]
        projections = points @ signs.T
        return float((projections.max(axis=0) - projections.min(axis=0)).max())
    best = 0.0
    for start in range(0, len(points), 2048):
        best = max(best, float(cdist(points[start:start + 2048], points, metric="cityblock").max()))
    return best


def _intrinsic_diameter(g: RootedGraph, members: np.ndarray, exact_limit: int) -> Tuple[float, bool]:
    if len(members) < 2:
        return 0.0, True
    if len(members) <= exact_limit:
        dist = shortest_path(g.adjacency, unweighted=True, indices=members)
        return float(dist[:, members].max()), True
    # Double sweep restricted to the sausage
    first = g.distances_from(int(members[0]))[members]
    far = int(members[int(np.argmax(first))])
    return float(g.distances_from(far)[members].max()), False


def sausage_diameters(g: RootedGraph, tree: SkeletonTree, exact_limit: int = 500) -> Dict[str, float]:
    """
    Largest Z^d and intrinsic diameters of the sausages {y : pi(y) = x}, x in V*

    Args:
        g: Rooted graph the skeleton was built from
        tree: Skeleton tree
        exact_limit: Sausages larger than this use the double-sweep lower bound for the intrinsic diameter

    Returns:
        Dict with delta_zd (None without locations), delta_intrinsic and the maximizing cut-points
    """
    labels = sausage_labels(g, tree)
    order = np.argsort(labels, kind="stable")
    boundaries = np.flatnonzero(np.diff(labels[order])) + 1
    groups = np.split(order, boundaries)

    delta_zd, delta_intrinsic = 0.0, 0.0
    argmax_zd = argmax_intrinsic = tree.root_star
    approximated = 0
    for members in groups:
        owner = int(labels[members[0]])
        if g.locations is not None:
            extent = _l1_diameter(g.locations[members].astype(float))
            if extent > delta_zd:
                delta_zd, argmax_zd = extent, owner
        extent, exact = _intrinsic_diameter(g, members, exact_limit)
        approximated += not exact
        if extent > delta_intrinsic:
            delta_intrinsic, argmax_intrinsic = extent, owner

    if approximated:
        logger.warning("%d sausages exceeded %d vertices; intrinsic diameter uses the double-sweep bound",
                       approximated, exact_limit)
    return {
        "delta_zd": float(delta_zd) if g.locations is not None else None,
        "delta_intrinsic": float(delta_intrinsic),
        "argmax_zd": int(argmax_zd) if g.locations is not None else None,
        "argmax_intrinsic": int(argmax_intrinsic),
    }
