"""
Reduced spatial trees: the subtree spanned by a root and finitely many marks,
with every degree-two vertex that is not a mark smoothed out
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Hashable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .skeleton_tree import SkeletonTree

logger = logging.getLogger(__name__)

ROOT, MARK, BRANCH = "root", "mark", "branch"


@dataclass(frozen=True, eq=False)
class ReducedSpatialTree:
    """
    Ordered rooted tree with edge lengths, optional edge resistances and vertex positions

    Vertices are numbered in depth-first preorder with children in canonical
    order, so vertex 0 is the root and parent[v] < v for every other vertex.
    ``lengths[v]`` and ``resistances[v]`` belong to the edge from v to its parent.
    """

    parent: Tuple[int, ...]
    kinds: Tuple[str, ...]
    labels: Tuple[Hashable, ...]
    mark_vertices: Tuple[int, ...]
    lengths: np.ndarray
    resistances: Optional[np.ndarray] = None
    positions: Optional[np.ndarray] = None

    @property
    def n_vertices(self) -> int:
        return len(self.parent)

    @property
    def n_edges(self) -> int:
        return len(self.parent) - 1

    @property
    def dimension(self) -> Optional[int]:
        return None if self.positions is None else int(self.positions.shape[1])

    def edges(self) -> List[Tuple[int, int]]:
        return [(p, v) for v, p in enumerate(self.parent) if p >= 0]

    def children(self, v: int) -> List[int]:
        return [w for w, p in enumerate(self.parent) if p == v]

    def branch_points(self) -> List[int]:
        return [v for v, kind in enumerate(self.kinds) if kind == BRANCH]

    def leaves(self) -> List[int]:
        has_child = {p for p in self.parent if p >= 0}
        return [v for v in range(self.n_vertices) if v not in has_child and v != 0]

    @cached_property
    def depth(self) -> np.ndarray:
        depth = np.zeros(self.n_vertices)
        for v in range(1, self.n_vertices):
            depth[v] = depth[self.parent[v]] + self.lengths[v]
        return depth

    def _ancestors(self, v: int) -> List[int]:
        chain = [v]
        while self.parent[chain[-1]] >= 0:
            chain.append(self.parent[chain[-1]])
        return chain

    def lowest_common_ancestor(self, a: int, b: int) -> int:
        above = set(self._ancestors(a))
        for v in self._ancestors(b):
            if v in above:
                return v
        return 0

    def distance(self, a: int, b: int) -> float:
        return float(self.depth[a] + self.depth[b] - 2.0 * self.depth[self.lowest_common_ancestor(a, b)])

    def distance_matrix(self) -> np.ndarray:
        m = self.n_vertices
        return np.array([[self.distance(a, b) for b in range(m)] for a in range(m)])

    def total_length(self) -> float:
        return float(self.lengths.sum())

    def path_to_root(self, v: int) -> List[int]:
        return self._ancestors(v)

    def parent_maps(self):
        """Parent, length, resistance and position keyed by label, for re-reduction"""
        parent = {self.labels[v]: (self.labels[p] if p >= 0 else None) for v, p in enumerate(self.parent)}
        lengths = {self.labels[v]: float(self.lengths[v]) for v in range(self.n_vertices)}
        resistances = None
        if self.resistances is not None:
            resistances = {self.labels[v]: float(self.resistances[v]) for v in range(self.n_vertices)}
        positions = None
        if self.positions is not None:
            positions = {self.labels[v]: self.positions[v] for v in range(self.n_vertices)}
        return parent, lengths, resistances, positions

    def scaled(self, length_factor: float = 1.0, position_factor: float = 1.0,
               resistance_factor: Optional[float] = None) -> "ReducedSpatialTree":
        """Copy with lengths, positions and resistances multiplied by constant factors"""
        resistances = None
        if self.resistances is not None:
            factor = length_factor if resistance_factor is None else resistance_factor
            resistances = self.resistances * factor
        return ReducedSpatialTree(
            parent=self.parent, kinds=self.kinds, labels=self.labels, mark_vertices=self.mark_vertices,
            lengths=self.lengths * length_factor, resistances=resistances,
            positions=None if self.positions is None else self.positions * position_factor,
        )

    def _name(self, v: int) -> str:
        if v == 0:
            return "root"
        if self.kinds[v] == MARK:
            return f"x{self.mark_vertices.index(v)}"
        return f"b{self.branch_points().index(v)}"

    def to_newick(self, precision: int = 6) -> str:
        """Newick string; each edge reads name:length, followed by [&res=r] when resistances are known"""
        def render(v: int) -> str:
            kids = self.children(v)
            text = f"({','.join(render(w) for w in kids)})" if kids else ""
            text += self._name(v)
            if v != 0:
                text += f":{self.lengths[v]:.{precision}g}"
                if self.resistances is not None:
                    text += f"[&res={self.resistances[v]:.{precision}g}]"
            return text
        return render(0) + ";"

    def coordinate_table(self) -> pd.DataFrame:
        """One row per vertex: name, kind, label, parent, edge length and coordinates"""
        rows = []
        for v in range(self.n_vertices):
            row = {
                "vertex": v,
                "name": self._name(v),
                "kind": self.kinds[v],
                "label": self.labels[v],
                "parent": self.parent[v],
                "length": float(self.lengths[v]),
            }
            if self.resistances is not None:
                row["resistance"] = float(self.resistances[v])
            if self.positions is not None:
                for axis, value in enumerate(self.positions[v]):
                    row[f"coord_{axis + 1}"] = float(value)
            rows.append(row)
        return pd.DataFrame(rows)


def reduce_tree(parent: Dict[Hashable, Optional[Hashable]], marks: Sequence[Hashable],
                lengths: Dict[Hashable, float], resistances: Optional[Dict[Hashable, float]] = None,
                positions: Optional[Dict[Hashable, np.ndarray]] = None) -> ReducedSpatialTree:
    """
    Reduce a rooted tree given by parent pointers onto the root and the marks

    Args:
        parent: Parent of every vertex, None for the root
        marks: Marked vertices; duplicates are dropped
        lengths: Length of the edge from each vertex to its parent
        resistances: Optional resistance of the same edges
        positions: Optional vertex positions

    Returns:
        ReducedSpatialTree with root, marks and induced branch points
    """
    roots = [v for v, p in parent.items() if p is None]
    if len(roots) != 1:
        raise ValueError(f"Parent map must have exactly one root, found {len(roots)}")
    root = roots[0]
    marks = list(dict.fromkeys(marks))
    for x in marks:
        if x not in parent:
            raise ValueError(f"Mark {x} is not a vertex of the tree")

    # Spanned subtree and its child counts
    spanned = {root}
    for x in marks:
        v = x
        while v not in spanned:
            spanned.add(v)
            v = parent[v]
    child_count: Dict[Hashable, int] = {}
    for v in spanned:
        if v != root:
            child_count[parent[v]] = child_count.get(parent[v], 0) + 1

    mark_set = set(marks)
    kept = {v for v in spanned if v == root or v in mark_set or child_count.get(v, 0) >= 2}

    # Reduced parent and accumulated edge weights
    reduced_parent, reduced_length, reduced_resistance = {}, {}, {}
    for v in kept:
        if v == root:
            continue
        length, resistance, w = 0.0, 0.0, v
        while True:
            length += lengths[w]
            if resistances is not None:
                resistance += resistances[w]
            w = parent[w]
            if w in kept:
                break
        reduced_parent[v], reduced_length[v], reduced_resistance[v] = w, length, resistance

    kids: Dict[Hashable, List[Hashable]] = {v: [] for v in kept}
    for v, p in reduced_parent.items():
        kids[p].append(v)

    mark_rank = {x: i for i, x in enumerate(marks)}

    def subtree_key(v: Hashable) -> Tuple:
        stack, best_position, best_mark = [v], None, len(marks)
        while stack:
            w = stack.pop()
            if positions is not None:
                point = tuple(float(c) for c in positions[w])
                best_position = point if best_position is None else min(best_position, point)
            best_mark = min(best_mark, mark_rank.get(w, len(marks)))
            stack.extend(kids[w])
        return (best_position or (), best_mark)

    # Canonical preorder
    order: List[Hashable] = []
    stack = [root]
    while stack:
        v = stack.pop()
        order.append(v)
        stack.extend(sorted(kids[v], key=subtree_key, reverse=True))
    index = {v: i for i, v in enumerate(order)}

    kinds = tuple(ROOT if v == root else MARK if v in mark_set else BRANCH for v in order)
    result = ReducedSpatialTree(
        parent=tuple(-1 if v == root else index[reduced_parent[v]] for v in order),
        kinds=kinds,
        labels=tuple(order),
        mark_vertices=tuple(index[x] for x in marks),
        lengths=np.array([0.0 if v == root else reduced_length[v] for v in order]),
        resistances=None if resistances is None else np.array(
            [0.0 if v == root else reduced_resistance[v] for v in order]),
        positions=None if positions is None else np.array([positions[v] for v in order], dtype=float),
    )
    logger.debug("Reduced tree: %d vertices from %d marks", result.n_vertices, len(marks))
    return result


def reduce_skeleton(tree: Union[SkeletonTree, ReducedSpatialTree], marks: Sequence[int]) -> ReducedSpatialTree:
    """
    Restrict a skeleton tree to root*, the marks and the branch points they induce

    Args:
        tree: Skeleton tree, or an already reduced tree (marks then refer to its labels)
        marks: Vertices of V* to keep

    Returns:
        ReducedSpatialTree whose labels are the skeleton vertex ids
    """
    if isinstance(tree, ReducedSpatialTree):
        parent, lengths, resistances, positions = tree.parent_maps()
        return reduce_tree(parent, marks, lengths, resistances, positions)

    for x in marks:
        if x not in tree.vstar:
            raise ValueError(f"Mark {x} is not a selected cut-point of the skeleton")
    parent = {v: (p if p >= 0 else None) for v, p in tree.parent.items()}
    lengths = {v: (0.0 if p < 0 else tree.graph.edges[p, v]["length"]) for v, p in tree.parent.items()}
    resistances = {v: (0.0 if p < 0 else tree.graph.edges[p, v]["resistance"]) for v, p in tree.parent.items()}
    return reduce_tree(parent, [int(x) for x in marks], lengths, resistances, tree.embedding)
