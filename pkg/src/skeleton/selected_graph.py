"""
Selected skeleton graph G(K): the cut-points leading to a set of marks, joined per bubble
"""
import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, FrozenSet, List, Sequence, Set, Tuple

import networkx as nx

from ..errors import StructuralError
from ..graph_core import CutDecomposition, RootedGraph

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SelectedSkeletonGraph:
    """
    Graph on the selected cut-points

    Two selected cut-points are adjacent when some path joins them without
    passing through a third one. Such paths stay inside one bubble plus the
    cut-point it hangs from, so every maximal clique comes from one bubble;
    `clique_bubbles` records which.
    """

    vertices: FrozenSet[int]
    adjacency: nx.Graph
    root_star: int
    cliques: Dict[int, FrozenSet[int]]
    clique_bubbles: Dict[int, int]
    marks: Tuple[int, ...]
    cuts: CutDecomposition

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def clique_sizes(self) -> Dict[int, int]:
        return {index: len(members) for index, members in self.cliques.items()}

    def triangles(self) -> Dict[int, FrozenSet[int]]:
        return {index: members for index, members in self.cliques.items() if len(members) == 3}

    def segments(self) -> Dict[int, FrozenSet[int]]:
        return {index: members for index, members in self.cliques.items() if len(members) == 2}

    def is_block_tree(self) -> bool:
        """True iff the cliques glue into a tree: connected, and every cycle stays inside one clique"""
        if not nx.is_connected(self.adjacency):
            return False
        return sum(len(members) - 1 for members in self.cliques.values()) == self.n_vertices - 1


def _bubble_links(g: RootedGraph, bubble: FrozenSet[int], group: Set[int]) -> List[Tuple[int, int]]:
    """
    Pairs of `group` joined inside the bubble without crossing another member of `group`

    The entry cut-point of the bubble may be in `group`; it only touches the
    bubble through its cut-bond.
    """
    region = g.graph.subgraph(bubble | group)
    links = {(min(u, v), max(u, v)) for u, v in region.edges if u in group and v in group}
    for component in nx.connected_components(region.subgraph(bubble - group)):
        touching = sorted({w for v in component for w in region.neighbors(v) if w in group})
        links.update(combinations(touching, 2))
    return sorted(links)


def build_selected_skeleton(g: RootedGraph, cuts: CutDecomposition, marks: Sequence[int]) -> SelectedSkeletonGraph:
    """
    Build G(K) from marked cut-points

    Args:
        g: Rooted graph
        cuts: Cut decomposition of g
        marks: Cut-points x_0, x_1, ...; duplicates are dropped, x_0 fixes root*

    Returns:
        SelectedSkeletonGraph with the maximal cliques of every bubble crossed on the way to the marks
    """
    if len(marks) == 0:
        raise ValueError("At least one mark is required")
    ordered = tuple(dict.fromkeys(int(x) for x in marks))
    for x in ordered:
        if not 0 <= x < g.n_vertices:
            raise StructuralError(f"Mark {x} is not a vertex of the graph")
        if x not in cuts.cut_points:
            raise StructuralError(f"Mark {x} is not a cut-point")

    vertices = set()
    for x in ordered:
        vertices.add(x)
        vertices.update(cuts.separating_cut_points(x))

    first_chain = cuts.separating_cut_points(ordered[0])
    root_star = first_chain[-1] if first_chain else ordered[0]

    # Every vertex of a bubble hangs from the same cut-bond
    groups: Dict[int, Set[int]] = {}
    for x in vertices:
        groups.setdefault(int(cuts.bubble_of[x]), set()).add(x)
    for group in groups.values():
        entry = int(cuts.last_cut[next(iter(group))])
        if entry >= 0:
            group.add(entry)

    adjacency = nx.Graph()
    adjacency.add_nodes_from(sorted(vertices))
    cliques, clique_bubbles = {}, {}
    for bubble, group in sorted(groups.items()):
        if len(group) < 2:
            continue
        local = nx.Graph()
        local.add_nodes_from(sorted(group))
        local.add_edges_from(_bubble_links(g, cuts.bubbles[bubble], group))
        adjacency.add_edges_from(local.edges, bubble=bubble)
        for members in sorted(sorted(clique) for clique in nx.find_cliques(local)):
            if len(members) < 2:
                continue
            index = len(cliques)
            cliques[index] = frozenset(members)
            clique_bubbles[index] = bubble

    logger.debug("G(K): %d vertices, %d cliques from %d marks", len(vertices), len(cliques), len(ordered))
    return SelectedSkeletonGraph(
        vertices=frozenset(vertices),
        adjacency=nx.freeze(adjacency),
        root_star=int(root_star),
        cliques=cliques,
        clique_bubbles=clique_bubbles,
        marks=ordered,
        cuts=cuts,
    )


def is_asymptotically_tree_like(sk: SelectedSkeletonGraph) -> bool:
    """True iff G(K) is made of segments and triangles only"""
    return all(len(members) <= 3 for members in sk.cliques.values())
