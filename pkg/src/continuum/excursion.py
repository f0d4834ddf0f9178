"""
Excursions on [0, 1] and the real-tree pseudo-metric they code
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, Tuple

import networkx as nx
import numpy as np

from ..graph_core import RootedGraph

logger = logging.getLogger(__name__)


class _RangeMin:
    """Sparse table answering min and argmin over inclusive index ranges"""

    def __init__(self, values: np.ndarray):
        self.values = values
        levels = [np.arange(len(values))]
        width = 1
        while 2 * width <= len(values):
            prev = levels[-1]
            left, right = prev[:-width], prev[width:]
            levels.append(np.where(values[left] <= values[right], left, right))
            width *= 2
        self.levels = levels

    def argmin(self, i: np.ndarray, j: np.ndarray) -> np.ndarray:
        i, j = np.asarray(i, dtype=np.int64), np.asarray(j, dtype=np.int64)
        k = np.floor(np.log2(j - i + 1)).astype(np.int64)
        left = np.empty_like(i)
        right = np.empty_like(i)
        for level in np.unique(k):
            mask = k == level
            table = self.levels[level]
            left[mask] = table[i[mask]]
            right[mask] = table[j[mask] - (1 << level) + 1]
        return np.where(self.values[left] <= self.values[right], left, right)


@dataclass(frozen=True, eq=False)
class Excursion:
    """Non-negative path on the uniform grid of [0, 1], linear between grid points"""

    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or len(samples) < 3:
            raise ValueError(f"Excursion needs at least 3 grid values, got shape {samples.shape}")
        if samples[0] != 0 or samples[-1] != 0:
            raise ValueError("Excursion must start and end at 0")
        if samples.min() < 0:
            raise ValueError("Excursion must be non-negative")
        if not samples.any():
            raise ValueError("Excursion is identically zero")
        object.__setattr__(self, "samples", samples)

    @classmethod
    def from_function(cls, func: Callable[[np.ndarray], np.ndarray], n_steps: int) -> "Excursion":
        """Sample func on the grid of n_steps intervals"""
        return cls(np.asarray(func(np.linspace(0.0, 1.0, n_steps + 1)), dtype=float))

    @property
    def n_steps(self) -> int:
        return len(self.samples) - 1

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, len(self.samples))

    @property
    def height(self) -> float:
        return float(self.samples.max())

    @cached_property
    def _range_min(self) -> _RangeMin:
        return _RangeMin(self.samples)

    def value(self, t) -> np.ndarray:
        return np.interp(t, self.grid, self.samples)

    def _check_times(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any((t < 0) | (t > 1)) or np.any(np.isnan(t)):
            raise ValueError(f"Times must lie in [0, 1], got {t}")
        return t

    def min_between(self, s, t) -> Tuple[np.ndarray, np.ndarray]:
        """
        Minimum of the path over [s ^ t, s v t] and a time attaining it

        Works elementwise on arrays of times.
        """
        s, t = np.broadcast_arrays(self._check_times(s), self._check_times(t))
        lo, hi = np.minimum(s, t).ravel(), np.maximum(s, t).ravel()
        n = self.n_steps
        values_lo, values_hi = self.value(lo), self.value(hi)
        best = np.where(values_lo <= values_hi, values_lo, values_hi)
        where = np.where(values_lo <= values_hi, lo, hi)

        # Grid points strictly inside the interval
        first = np.floor(lo * n).astype(np.int64) + 1
        last = np.ceil(hi * n).astype(np.int64) - 1
        inside = first <= last
        if inside.any():
            idx = self._range_min.argmin(first[inside], last[inside])
            inner = self.samples[idx]
            better = inner < best[inside]
            best_inside, where_inside = best[inside], where[inside]
            best_inside[better] = inner[better]
            where_inside[better] = idx[better] / n
            best[inside], where[inside] = best_inside, where_inside
        return best.reshape(s.shape), where.reshape(s.shape)

    def to_dict(self) -> Dict:
        return {"n_steps": self.n_steps, "samples": [float(x) for x in self.samples]}


def tree_distance(exc: Excursion, s, t):
    """
    d_g(s, t) = g(s) + g(t) - 2 min_{[s ^ t, s v t]} g

    Args:
        exc: Coding excursion
        s, t: Times in [0, 1], scalars or arrays

    Returns:
        Distance, same shape as the broadcast inputs
    """
    low, _ = exc.min_between(s, t)
    result = exc.value(np.asarray(s, dtype=float)) + exc.value(np.asarray(t, dtype=float)) - 2.0 * low
    result = np.maximum(result, 0.0)
    return float(result) if np.ndim(result) == 0 else result


def sample_normalized_excursion(n_steps: int, rng: np.random.Generator) -> Excursion:
    """
    Uniform Dyck path of n_steps steps with heights scaled by 1/sqrt(n_steps)

    A uniform arrangement of n/2 up-steps and n/2 + 1 down-steps is rotated
    to start right after its first minimum; the rotation is a first-passage
    path to -1 and dropping its last step leaves a uniform Dyck path.
    """
    if n_steps < 2 or n_steps % 2:
        raise ValueError(f"n_steps must be even and at least 2, got {n_steps}")
    half = n_steps // 2
    steps = np.concatenate((np.ones(half, dtype=np.int64), -np.ones(half + 1, dtype=np.int64)))
    rng.shuffle(steps)
    walk = np.cumsum(steps)
    cut = int(np.argmin(walk)) + 1
    rotated = np.roll(steps, -cut)[:-1]
    heights = np.concatenate(([0], np.cumsum(rotated)))
    return Excursion(heights / np.sqrt(n_steps))


def _contour(tree: RootedGraph) -> Tuple[np.ndarray, np.ndarray]:
    """Depth-first contour heights and first-visit step of each vertex, children in label order"""
    if not tree.is_tree:
        raise ValueError("Contour functions are defined for trees only")
    heights = [0]
    first_visit = np.zeros(tree.n_vertices, dtype=np.int64)
    successors = nx.dfs_successors(tree.graph, tree.root)
    stack = [(tree.root, iter(sorted(successors.get(tree.root, []))))]
    while stack:
        vertex, children = stack[-1]
        child = next(children, None)
        if child is None:
            stack.pop()
            if stack:
                heights.append(heights[-1] - 1)
            continue
        heights.append(heights[-1] + 1)
        first_visit[child] = len(heights) - 1
        stack.append((child, iter(sorted(successors.get(child, [])))))
    return np.asarray(heights, dtype=float), first_visit


def contour_excursion(tree: RootedGraph) -> Excursion:
    """Contour function of a plane tree with heights scaled by 1/sqrt(2(n-1))"""
    if tree.n_vertices < 2:
        raise ValueError("Contour excursion needs at least two vertices")
    heights, _ = _contour(tree)
    return Excursion(heights / np.sqrt(len(heights) - 1))


def contour_first_visits(tree: RootedGraph) -> np.ndarray:
    """Time in [0, 1] at which the contour first reaches each vertex"""
    heights, first_visit = _contour(tree)
    return first_visit / (len(heights) - 1)
