"""
Time change of the skeleton trace

The walk watched on V* spends A(m) steps to make m jumps. This module
compares the rescaled A against two predictions built from the skeleton:
the averaged time change (expected sojourn per visited cut-point) and the
commute-time approximation (edge mass per crossed skeleton edge), both read
off the local-time clock of the skeleton.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd
from sklearn.linear_model import LinearRegression

from ..errors import InsufficientDataError, StructuralError
from ..graph_core import RootedGraph
from ..skeleton import SkeletonTree, sausage_labels
from .srw import TraceRecord, WalkTrace, trace_on_skeleton

logger = logging.getLogger(__name__)

DEFAULT_GRID_POINTS = 20
FIT_SKIP_FRACTION = 0.1


def expected_sojourn_times(g: RootedGraph, vstar) -> pd.Series:
    """
    E[tau(x)]: expected steps from x until the walk hits V* minus x

    Returns:
        Series indexed by the sorted V*; inf when V* is a single vertex
    """
    states = sorted({int(v) for v in vstar})
    if not states:
        raise ValueError("V* must not be empty")
    network = g.network
    times = {}
    for x in states:
        others = [y for y in states if y != x]
        times[x] = network.expected_exit_time(x, others) if others else np.inf
    return pd.Series(times, name="expected_sojourn", dtype=float)


def _selected_neighbours(tree: SkeletonTree) -> Dict[int, set]:
    """G(K) adjacency: bonds directly, triangle corners through their star center"""
    neighbours = {int(x): set() for x in tree.vstar}
    for u, v, data in tree.graph.edges(data=True):
        if data["kind"] == "bond":
            neighbours[u].add(v)
            neighbours[v].add(u)
    for corners in tree.star_centers.values():
        for x in corners:
            neighbours[x].update(y for y in corners if y != x)
    return neighbours


def _owned_mass(g: RootedGraph, tree: SkeletonTree) -> Dict[int, float]:
    """Degree mass of the sausage of x: x itself plus the vertices outside V* projecting to x"""
    owner = sausage_labels(g, tree)
    vstar = np.fromiter(tree.vstar, dtype=np.int64)
    owner[vstar] = vstar
    totals = np.bincount(owner, weights=g.degrees.astype(float), minlength=g.n_vertices)
    return {int(x): float(totals[x]) for x in vstar}


def edge_sausage_sizes(g: RootedGraph, tree: SkeletonTree) -> Dict[Tuple[int, int], float]:
    """
    |E(G(e))| for every edge e = {x, y} of G(K)

    Each cut-point splits the edge mass of its sausage evenly over its G(K)
    edges, so the sizes add up to the number of edges of g.

    Returns:
        Mapping from (min, max) vertex pairs to edge counts
    """
    if tree.n_graph_vertices != g.n_vertices:
        raise StructuralError("Skeleton was not built from this graph")
    neighbours = _selected_neighbours(tree)
    mass = _owned_mass(g, tree)
    sizes = {}
    for x, around in neighbours.items():
        for y in around:
            if x < y:
                sizes[(x, y)] = mass[x] / (2 * len(neighbours[x])) + mass[y] / (2 * len(neighbours[y]))
    return sizes


@dataclass(frozen=True)
class TimeChangeProfile:
    """Rescaled time changes along the local-time clock"""

    t_grid: np.ndarray
    m: np.ndarray
    raw: np.ndarray
    averaged: np.ndarray
    commute: np.ndarray
    slope: float
    n: int

    @property
    def ratios(self) -> np.ndarray:
        """raw / t on the grid"""
        return self.raw / self.t_grid

    @property
    def fit_window(self) -> np.ndarray:
        return np.arange(len(self.t_grid)) >= int(np.ceil(FIT_SKIP_FRACTION * len(self.t_grid)))

    @property
    def ratio_cv(self) -> float:
        """Coefficient of variation of raw / t over the fit window"""
        ratios = self.ratios[self.fit_window]
        mean = ratios.mean()
        return float(ratios.std(ddof=1) / mean) if len(ratios) > 1 and mean > 0 else float("nan")

    def relative_gap(self, which: str = "commute") -> np.ndarray:
        other = self.commute if which == "commute" else self.averaged
        return np.abs(self.raw - other) / np.where(self.raw > 0, self.raw, np.nan)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.t_grid, "m": self.m, "raw": self.raw, "averaged": self.averaged,
                             "commute": self.commute})


class _SkeletonClock:
    """Per-jump increments of the clock and of the commute-time approximation, cached by vertex pair"""

    def __init__(self, g: RootedGraph, tree: SkeletonTree, n: int):
        self.tree = tree
        self.scale = 1.0 / (np.sqrt(n) * tree.total_resistance())
        self.neighbours = _selected_neighbours(tree)
        self.mass = _owned_mass(g, tree)
        self._cache: Dict[Tuple[int, int], Tuple[float, float]] = {}

    def increments(self, x: int, y: int) -> Tuple[float, float]:
        key = (x, y) if x < y else (y, x)
        if key not in self._cache:
            path = self.tree.path(x, y)
            squares = sum(self.tree.edge_data(a, b)["resistance"] ** 2 for a, b in zip(path[:-1], path[1:]))
            if y not in self.neighbours[x]:
                raise StructuralError(f"Jump {x} -> {y} is not along a G(K) edge")
            size = (self.mass[x] / (2 * max(len(self.neighbours[x]), 1))
                    + self.mass[y] / (2 * max(len(self.neighbours[y]), 1)))
            self._cache[key] = (squares * self.scale, self.tree.resistance(x, y) * size)
        return self._cache[key]


def time_change_profiles(g: RootedGraph, tree: SkeletonTree, trace: WalkTrace,
                         t_grid: Optional[np.ndarray] = None, n: Optional[int] = None,
                         record: Optional[TraceRecord] = None) -> TimeChangeProfile:
    """
    Raw, averaged and commute-time profiles of n^{-3/2} A(m(t))

    Args:
        g: Graph the walk ran on
        tree: Skeleton of g
        trace: Walk trace on g
        t_grid: Positive clock values; defaults to an even grid up to the final clock reading
        n: Rescaling size, the number of vertices of g by default
        record: Precomputed trace on V*

    Returns:
        TimeChangeProfile

    Raises:
        StructuralError: if the skeleton does not belong to g
        InsufficientDataError: if the walk makes fewer than two jumps on V*
    """
    if tree.n_graph_vertices != g.n_vertices or trace.graph.n_vertices != g.n_vertices:
        raise StructuralError("Skeleton and walk must come from the same graph")
    n = g.n_vertices if n is None else int(n)
    record = trace_on_skeleton(trace, tree.vstar) if record is None else record
    if record.n_visits < 3:
        raise InsufficientDataError(f"Walk made {max(record.n_visits - 1, 0)} jumps on V*, need at least 2")

    sojourn = expected_sojourn_times(g, tree.vstar)
    clock = _SkeletonClock(g, tree, n)
    steps = np.array([clock.increments(int(a), int(b)) for a, b in zip(record.J[:-1], record.J[1:])])
    clock_values = np.concatenate(([0.0], np.cumsum(steps[:, 0])))
    averaged = record.A[0] + np.concatenate(([0.0], np.cumsum(sojourn.loc[record.J[:-1]].to_numpy())))
    commute = record.A[0] + np.concatenate(([0.0], np.cumsum(steps[:, 1])))

    if t_grid is None:
        t_grid = np.linspace(0.0, clock_values[-1], DEFAULT_GRID_POINTS + 1)[1:]
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid <= 0):
        raise ValueError("Clock grid must be positive")
    m = np.minimum(np.searchsorted(clock_values, t_grid, side="left"), record.n_visits - 1)

    scale = float(n) ** -1.5
    raw = scale * record.A[m].astype(float)
    window = np.arange(len(t_grid)) >= int(np.ceil(FIT_SKIP_FRACTION * len(t_grid)))
    if window.sum() < 2:
        raise InsufficientDataError("Clock grid too short to fit a slope")
    slope = LinearRegression().fit(t_grid[window].reshape(-1, 1), raw[window]).coef_[0]
    logger.info("Time change over %d jumps: slope %.4g", record.n_visits - 1, slope)
    return TimeChangeProfile(t_grid=t_grid, m=m, raw=raw, averaged=scale * averaged[m], commute=scale * commute[m],
                             slope=float(slope), n=n)
