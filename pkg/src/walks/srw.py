"""
Simple random walk on rooted graphs and its trace on the skeleton cut-points
"""
import logging
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
import pandas as pd

from ..graph_core import RootedGraph

logger = logging.getLogger(__name__)

UNIFORM_BATCH = 65536


@dataclass(frozen=True, eq=False)
class WalkTrace:
    """Vertex sequence X_0..X_m of a nearest-neighbour walk on graph"""

    graph: RootedGraph
    vertices: np.ndarray

    @property
    def n_steps(self) -> int:
        return len(self.vertices) - 1

    @property
    def start(self) -> int:
        return int(self.vertices[0])

    def intrinsic_displacement(self, steps: Optional[np.ndarray] = None) -> np.ndarray:
        """d_G(X_0, X_m) at the requested steps (all steps by default)"""
        steps = np.arange(len(self.vertices)) if steps is None else np.asarray(steps)
        return self.graph.distances_from(self.start)[self.vertices[steps]].astype(float)

    def euclidean_displacement(self, steps: Optional[np.ndarray] = None) -> np.ndarray:
        """|X_m - X_0| in the lattice embedding"""
        if self.graph.locations is None:
            raise ValueError("Graph has no lattice locations")
        steps = np.arange(len(self.vertices)) if steps is None else np.asarray(steps)
        offsets = self.graph.locations[self.vertices[steps]] - self.graph.locations[self.start]
        return np.linalg.norm(offsets, axis=1)

    def at_start(self, steps: Optional[np.ndarray] = None) -> np.ndarray:
        steps = np.arange(len(self.vertices)) if steps is None else np.asarray(steps)
        return self.vertices[steps] == self.start


def srw(g: RootedGraph, steps: int, rng: np.random.Generator, start: Optional[int] = None) -> WalkTrace:
    """
    Simple random walk from the root (or start) for a fixed number of steps

    Args:
        g: Graph
        steps: Number of steps, >= 0
        rng: Random generator
        start: Start vertex, root by default

    Returns:
        WalkTrace with steps + 1 vertices
    """
    if steps < 0:
        raise ValueError(f"steps must be non-negative, got {steps}")
    vertex = g.root if start is None else int(start)
    if not 0 <= vertex < g.n_vertices:
        raise ValueError(f"Start {vertex} is not a vertex")

    adjacency = g.adjacency
    indptr, indices = adjacency.indptr.tolist(), adjacency.indices.tolist()
    path = np.empty(steps + 1, dtype=np.int64)
    path[0] = vertex
    if g.n_vertices == 1:
        path[:] = vertex
        return WalkTrace(graph=g, vertices=path)
    for lo in range(0, steps, UNIFORM_BATCH):
        uniforms = rng.random(min(UNIFORM_BATCH, steps - lo)).tolist()
        for offset, u in enumerate(uniforms):
            first, last = indptr[vertex], indptr[vertex + 1]
            vertex = indices[first + int(u * (last - first))]
            path[lo + offset + 1] = vertex
    return WalkTrace(graph=g, vertices=path)


@dataclass(frozen=True)
class TraceRecord:
    """
    Successive distinct cut-points J_0, J_1, ... hit by a walk and the steps A(m) at which they are hit

    A is strictly increasing and the walk sits at J_m at step A(m).
    """

    J: np.ndarray
    A: np.ndarray

    @property
    def n_visits(self) -> int:
        return len(self.J)

    @property
    def is_empty(self) -> bool:
        return len(self.J) == 0

    def index_after(self, t) -> np.ndarray:
        """S(t) = min{m : A(m) >= t}, clipped to the last index"""
        return np.minimum(np.searchsorted(self.A, t, side="left"), len(self.A) - 1)

    def inverse(self, t) -> np.ndarray:
        """Generalized inverse of A with linear interpolation between visits"""
        return np.interp(t, self.A, np.arange(len(self.A), dtype=float))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"m": np.arange(len(self.J)), "J": self.J, "A": self.A})


def trace_on_skeleton(trace: WalkTrace, vstar: Iterable[int]) -> TraceRecord:
    """
    Watch a walk only at the cut-points V*

    Args:
        trace: Walk trace
        vstar: Non-empty vertex set

    Returns:
        TraceRecord; empty when the walk never hits V*
    """
    vstar = np.fromiter((int(v) for v in vstar), dtype=np.int64)
    if len(vstar) == 0:
        raise ValueError("V* must not be empty")
    hits = np.flatnonzero(np.isin(trace.vertices, vstar))
    visited = trace.vertices[hits]
    if len(visited):
        fresh = np.concatenate(([True], visited[1:] != visited[:-1]))
        visited, hits = visited[fresh], hits[fresh]
    return TraceRecord(J=visited.astype(np.int64), A=hits.astype(np.int64))


def graph_trace_chain(g: RootedGraph, vstar: Iterable[int]) -> pd.DataFrame:
    """
    Exact transition matrix of J: from each x in V*, the harmonic measure of V* minus x

    Returns:
        DataFrame indexed and columned by the sorted V*
    """
    states = sorted({int(v) for v in vstar})
    if not states:
        raise ValueError("V* must not be empty")
    network = g.network
    position = {v: i for i, v in enumerate(states)}
    matrix = np.zeros((len(states), len(states)))
    for i, x in enumerate(states):
        boundary = [y for y in states if y != x]
        if not boundary:
            continue
        for y, p in network.harmonic_measure(x, boundary).items():
            matrix[i, position[y]] = p
    return pd.DataFrame(matrix, index=states, columns=states)


def empirical_transitions(record: TraceRecord, states: Iterable[int]) -> pd.DataFrame:
    """Row-normalized counts of J_m -> J_{m+1}; rows without departures stay zero"""
    states = sorted(int(v) for v in states)
    position = {v: i for i, v in enumerate(states)}
    counts = np.zeros((len(states), len(states)))
    for a, b in zip(record.J[:-1].tolist(), record.J[1:].tolist()):
        counts[position[a], position[b]] += 1
    totals = counts.sum(axis=1, keepdims=True)
    matrix = np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
    return pd.DataFrame(matrix, index=states, columns=states)
