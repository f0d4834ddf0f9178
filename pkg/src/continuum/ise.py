"""
Gaussian embedding of reduced trees and the K-ISE sampler
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np

from ..skeleton import ReducedSpatialTree
from .crt import reduce_crt
from .excursion import Excursion, sample_normalized_excursion

logger = logging.getLogger(__name__)

DEFAULT_GRID_PER_UNIT = 64
MIN_REGIME_DIMENSION = 8


@dataclass(frozen=True, eq=False)
class KISESample:
    """Reduced tree with a Brownian embedding; edge_paths[v] runs from parent(v) to v"""

    tree: ReducedSpatialTree
    dimension: int
    edge_paths: Dict[int, np.ndarray] = field(default_factory=dict)
    excursion: Optional[Excursion] = None
    marks: Optional[np.ndarray] = None

    @property
    def positions(self) -> np.ndarray:
        return self.tree.positions

    def mark_positions(self) -> np.ndarray:
        return self.tree.positions[list(self.tree.mark_vertices)]

    def to_dict(self) -> Dict:
        """Same vertex/edge layout as the skeleton JSON document"""
        tree = self.tree
        vertices = [
            {"id": v, "kind": tree.kinds[v], "label": float(tree.labels[v]),
             "position": [float(x) for x in tree.positions[v]]}
            for v in range(tree.n_vertices)
        ]
        edges = [{"u": p, "v": v, "len": float(tree.lengths[v]), "res": None, "kind": "segment"}
                 for p, v in tree.edges()]
        doc = {"root_star": 0, "dimension": self.dimension, "vertices": vertices, "edges": edges,
               "newick": tree.to_newick()}
        if self.marks is not None:
            doc["marks"] = [float(u) for u in self.marks]
        return doc

    def to_json(self, path: Optional[Union[str, Path]] = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text


def embed_gaussian(tree: ReducedSpatialTree, d: int, rng: np.random.Generator,
                   grid_per_unit: int = DEFAULT_GRID_PER_UNIT) -> KISESample:
    """
    Brownian motion indexed by a reduced tree

    Each coordinate is an independent standard Brownian motion in the length
    parameter, started at the origin at the root and branching consistently.

    Args:
        tree: Reduced tree (positions are ignored and replaced)
        d: Spatial dimension
        rng: Random generator
        grid_per_unit: Sample points per unit of edge length; edge endpoints are always sampled

    Returns:
        KISESample with vertex positions and sampled edge paths
    """
    if d < 1:
        raise ValueError(f"Dimension must be positive, got {d}")
    if grid_per_unit < 1:
        raise ValueError(f"grid_per_unit must be positive, got {grid_per_unit}")

    positions = np.zeros((tree.n_vertices, d))
    paths = {}
    for v in range(1, tree.n_vertices):
        length = float(tree.lengths[v])
        pieces = max(1, int(np.ceil(length * grid_per_unit)))
        increments = rng.normal(0.0, np.sqrt(length / pieces), size=(pieces, d))
        start = positions[tree.parent[v]]
        path = np.vstack((start, start + np.cumsum(increments, axis=0)))
        positions[v] = path[-1]
        paths[v] = path

    embedded = ReducedSpatialTree(
        parent=tree.parent, kinds=tree.kinds, labels=tree.labels, mark_vertices=tree.mark_vertices,
        lengths=tree.lengths, resistances=tree.resistances, positions=positions,
    )
    return KISESample(tree=embedded, dimension=d, edge_paths=paths)


def sample_kise(k: int, n_steps: int, d: int, rng: np.random.Generator,
                grid_per_unit: int = DEFAULT_GRID_PER_UNIT) -> KISESample:
    """
    K-ISE: excursion, K uniform marks, reduced tree, Gaussian embedding

    Args:
        k: Number of marks
        n_steps: Excursion grid size (even)
        d: Spatial dimension
        rng: Random generator
        grid_per_unit: Embedding grid density

    Returns:
        KISESample keeping the excursion and mark times
    """
    if k < 1:
        raise ValueError(f"K must be at least 1, got {k}")
    if d < MIN_REGIME_DIMENSION:
        logger.warning("K-ISE requested at d=%d; the embedding is only known to be injective for d >= %d",
                       d, MIN_REGIME_DIMENSION)
    excursion = sample_normalized_excursion(n_steps, rng)
    marks = rng.uniform(0.0, 1.0, size=k)
    sample = embed_gaussian(reduce_crt(excursion, marks), d, rng, grid_per_unit)
    return KISESample(tree=sample.tree, dimension=d, edge_paths=sample.edge_paths,
                      excursion=excursion, marks=marks)
