"""
Real trees coded by excursions, marked at finitely many times, and their reduced subtrees
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..skeleton import ReducedSpatialTree, reduce_tree
from .excursion import Excursion, tree_distance

logger = logging.getLogger(__name__)

MERGE_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class MarkedRealTree:
    """Excursion-coded real tree with marked times U_1..U_K"""

    excursion: Excursion
    marks: Tuple[float, ...]

    def __post_init__(self):
        marks = tuple(float(u) for u in self.marks)
        if not marks:
            raise ValueError("At least one mark is required")
        if any(not 0.0 <= u <= 1.0 for u in marks):
            raise ValueError(f"Marks must lie in [0, 1], got {marks}")
        object.__setattr__(self, "marks", marks)

    @property
    def k(self) -> int:
        return len(self.marks)

    @cached_property
    def depths(self) -> np.ndarray:
        """d(root, sigma_i)"""
        return self.excursion.value(np.array(self.marks))

    @cached_property
    def distances(self) -> np.ndarray:
        times = np.array(self.marks)
        s, t = np.meshgrid(times, times, indexing="ij")
        return np.asarray(tree_distance(self.excursion, s, t))

    @cached_property
    def branch_depths(self) -> np.ndarray:
        """Depth of the most recent common ancestor of each pair of marks"""
        times = np.array(self.marks)
        s, t = np.meshgrid(times, times, indexing="ij")
        low, _ = self.excursion.min_between(s, t)
        return low

    def gromov_depths(self) -> np.ndarray:
        """Branch depths recomputed as Gromov products at the root"""
        return 0.5 * (self.depths[:, None] + self.depths[None, :] - self.distances)

    def four_point_violation(self) -> float:
        """Largest excess in the four-point condition over all quadruples of marks and the root"""
        d = np.zeros((self.k + 1, self.k + 1))
        d[1:, 1:] = self.distances
        d[0, 1:] = d[1:, 0] = self.depths
        worst = 0.0
        m = self.k + 1
        for a in range(m):
            for b in range(a + 1, m):
                for c in range(b + 1, m):
                    for e in range(c + 1, m):
                        sums = sorted([d[a, b] + d[c, e], d[a, c] + d[b, e], d[a, e] + d[b, c]])
                        worst = max(worst, sums[2] - sums[1])
        return float(worst)

    def reduce(self) -> ReducedSpatialTree:
        return reduce_crt(self.excursion, self.marks)


def reduce_crt(exc: Excursion, marks: Sequence[float]) -> ReducedSpatialTree:
    """
    Reduced subtree spanned by the root and the points coded by the marked times

    Marks are swept in time order while the current root-to-mark path is kept
    on a stack; the branch point with the next mark sits at the minimum of the
    excursion between the two times. Vertices are labelled by a time coding
    them (0.0 for the root).

    Args:
        exc: Coding excursion
        marks: Times in [0, 1]

    Returns:
        ReducedSpatialTree with lengths only
    """
    marked = MarkedRealTree(exc, tuple(marks))
    order = np.argsort(marked.marks, kind="stable")
    times = np.array(marked.marks)[order]
    depths = marked.depths[order]
    if len(times) > 1:
        valleys, valley_times = exc.min_between(times[:-1], times[1:])
    else:
        valleys, valley_times = np.empty(0), np.empty(0)

    root = 0.0
    parent: Dict[float, object] = {root: None}
    depth_of: Dict[float, float] = {root: 0.0}
    label_of_mark: Dict[int, float] = {}
    stack: List[float] = [root]

    for step, (time, depth) in enumerate(zip(times, depths)):
        if step == 0:
            branch_depth, branch_time = 0.0, 0.0
        else:
            branch_depth, branch_time = float(valleys[step - 1]), float(valley_times[step - 1])

        popped = None
        while depth_of[stack[-1]] > branch_depth + MERGE_TOLERANCE:
            popped = stack.pop()
        if depth_of[stack[-1]] < branch_depth - MERGE_TOLERANCE:
            branch = branch_time
            parent[branch], depth_of[branch] = stack[-1], branch_depth
            parent[popped] = branch
            stack.append(branch)

        anchor = stack[-1]
        if depth - depth_of[anchor] <= MERGE_TOLERANCE:
            label = anchor
        else:
            label = float(time)
            parent[label], depth_of[label] = anchor, float(depth)
            stack.append(label)
        label_of_mark[int(order[step])] = label

    mark_labels = [label_of_mark[i] for i in range(len(times))]
    lengths = {v: (0.0 if p is None else depth_of[v] - depth_of[p]) for v, p in parent.items()}
    reduced = reduce_tree(parent, mark_labels, lengths)
    logger.debug("Reduced CRT: %d marks -> %d vertices", len(times), reduced.n_vertices)
    return reduced
