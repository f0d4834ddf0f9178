"""
Skeleton Builder - Runs cut decomposition, G(K), star-triangle expansion and reduction on one graph
"""
import logging
from typing import Dict, Optional, Sequence

from ..errors import StructuralError
from ..graph_core import CutDecomposition, RootedGraph, find_cut_decomposition
from .reduced_tree import ReducedSpatialTree, reduce_skeleton
from .selected_graph import SelectedSkeletonGraph, build_selected_skeleton, is_asymptotically_tree_like
from .skeleton_tree import SkeletonTree, expand_star_triangle, sausage_diameters

logger = logging.getLogger(__name__)


class SkeletonBuilder:
    """Builds and caches the skeleton of a rooted graph for a set of marks"""

    def __init__(self, g: RootedGraph):
        self.g = g
        self.cuts: Optional[CutDecomposition] = None
        self.selected: Optional[SelectedSkeletonGraph] = None
        self.tree: Optional[SkeletonTree] = None

    def decompose(self) -> CutDecomposition:
        if self.cuts is None:
            self.cuts = find_cut_decomposition(self.g)
        return self.cuts

    def select(self, marks: Sequence[int]) -> SelectedSkeletonGraph:
        self.selected = build_selected_skeleton(self.g, self.decompose(), marks)
        self.tree = None
        return self.selected

    def build(self, marks: Sequence[int]) -> SkeletonTree:
        """
        Build the skeleton tree for the given marks

        Args:
            marks: Cut-points x_0, x_1, ...

        Returns:
            SkeletonTree

        Raises:
            StructuralError: if G(K) is not asymptotically tree-like or its cliques close a cycle
        """
        selected = self.select(marks)
        if not is_asymptotically_tree_like(selected):
            raise StructuralError(f"G(K) for marks {list(selected.marks)} has a clique of size > 3")
        self.tree = expand_star_triangle(self.g, selected)
        return self.tree

    def reduce(self, marks: Optional[Sequence[int]] = None) -> ReducedSpatialTree:
        if self.tree is None:
            raise ValueError("Skeleton not built. Call build() first.")
        return reduce_skeleton(self.tree, self.selected.marks if marks is None else marks)

    def sausages(self, exact_limit: int = 500) -> Dict:
        if self.tree is None:
            raise ValueError("Skeleton not built. Call build() first.")
        return sausage_diameters(self.g, self.tree, exact_limit=exact_limit)

    def summary(self) -> Dict:
        """Counts describing the last built skeleton"""
        if self.tree is None:
            raise ValueError("Skeleton not built. Call build() first.")
        tree = self.tree
        return {
            "n_graph_vertices": self.g.n_vertices,
            "n_graph_edges": self.g.n_edges,
            "n_cut_points": len(self.cuts.cut_points),
            "n_marks": len(self.selected.marks),
            "n_vstar": len(tree.vstar),
            "n_triangles": len(tree.star_centers),
            "root_star": tree.root_star,
            "total_length": tree.total_length(),
            "total_resistance": tree.total_resistance(),
            "total_measure": int(sum(tree.measure.values())),
        }
