"""
Distance between reduced spatial trees of the same ordered shape
"""
from typing import Dict

import numpy as np

from ..skeleton import ReducedSpatialTree


def same_shape(a: ReducedSpatialTree, b: ReducedSpatialTree) -> bool:
    """Equal parent pointers and mark placement in canonical preorder"""
    return a.parent == b.parent and a.mark_vertices == b.mark_vertices


def tree_distance_parts(a: ReducedSpatialTree, b: ReducedSpatialTree) -> Dict[str, float]:
    """
    Edge-length and embedding parts of the tree distance

    Corresponding edges are matched by the edge-affine homeomorphism, and
    embeddings are affine along edges. The embedding gap is then affine on
    each edge too, so its sup is attained at the vertices.

    Returns:
        Dict with d1 and d2; both are inf when the shapes differ
    """
    if not same_shape(a, b):
        return {"d1": np.inf, "d2": np.inf}
    d1 = float(np.abs(a.lengths - b.lengths).max()) if a.n_vertices > 1 else 0.0
    if a.positions is None and b.positions is None:
        d2 = 0.0
    elif a.positions is None or b.positions is None:
        raise ValueError("Both trees need positions to compare embeddings")
    elif a.positions.shape != b.positions.shape:
        raise ValueError(f"Embedding dimensions differ: {a.positions.shape[1]} vs {b.positions.shape[1]}")
    else:
        d2 = float(np.linalg.norm(a.positions - b.positions, axis=1).max())
    return {"d1": d1, "d2": d2}


def tree_distance_D(a: ReducedSpatialTree, b: ReducedSpatialTree) -> float:
    """D(a, b) = (d1 + d2) capped at 1; trees of different shapes are at distance 1"""
    parts = tree_distance_parts(a, b)
    return float(min(parts["d1"] + parts["d2"], 1.0))
