"""
Brownian motion on discretized metric trees: path simulation, local times,
edge crossings and the closed-form hitting and occupation formulas
"""
import logging
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional, Tuple, Union

import networkx as nx
import numpy as np
import pandas as pd
import scipy.sparse as sp

from ..errors import StructuralError
from ..graph_core import ElectricalNetwork
from ..skeleton import SkeletonTree
from .metric_net import LENGTH, RESISTANCE, MetricTreeNet, SourceTree, source_edges

logger = logging.getLogger(__name__)

UNIFORM_BATCH = 4096
DEFAULT_MAX_STEPS = 10_000_000


def _site_columns(net: MetricTreeNet, sites: np.ndarray) -> pd.DataFrame:
    vertices = np.asarray(net.tree.vertices)
    is_vertex = sites < net.n_vertices
    frame = pd.DataFrame({
        "site": sites,
        "vertex": np.where(is_vertex, vertices[np.minimum(sites, net.n_vertices - 1)], -1),
        "edge": net.site_edge[sites],
        "offset": net.site_offset[sites],
    })
    if net.positions is not None:
        for axis in range(net.positions.shape[1]):
            frame[f"coord_{axis + 1}"] = net.positions[sites, axis]
    return frame


@dataclass(frozen=True, eq=False)
class TreeDiffusionPath:
    """
    Lattice path with arrival times

    The walk sits at ``sites[i]`` during ``[times[i], times[i + 1])`` and at
    the last site until ``t_end``.
    """

    net: MetricTreeNet
    sites: np.ndarray
    times: np.ndarray
    t_end: float

    @property
    def n_steps(self) -> int:
        return len(self.sites) - 1

    @property
    def current(self) -> int:
        return int(self.sites[-1])

    def site_at(self, t: float) -> int:
        if not 0.0 <= t <= self.t_end:
            raise ValueError(f"Time {t} outside [0, {self.t_end}]")
        return int(self.sites[np.searchsorted(self.times, t, side="right") - 1])

    def to_frame(self) -> pd.DataFrame:
        """One row per arrival: time, site, vertex (-1 inside an edge), edge, offset and coordinates"""
        frame = _site_columns(self.net, self.sites)
        frame.insert(0, "time", self.times)
        return frame

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False)


def simulate(net: MetricTreeNet, t_max: float, rng: np.random.Generator, start: Optional[int] = None,
             stop_sites: Optional[Iterable[int]] = None) -> TreeDiffusionPath:
    """
    Run the lattice walk up to time t_max

    Each visit to a site advances the clock by its hold time; jumps go to a
    neighbour with probability proportional to the piece conductance.

    Args:
        net: Discretized tree
        t_max: Time horizon
        rng: Random generator
        start: Start site (root site by default)
        stop_sites: Optional sites that end the path on arrival

    Returns:
        TreeDiffusionPath
    """
    if t_max < 0:
        raise ValueError(f"t_max must be non-negative, got {t_max}")
    site = net.root_site if start is None else int(start)
    if not 0 <= site < net.n_sites:
        raise ValueError(f"Start site {site} out of range")
    stop = set() if stop_sites is None else {int(s) for s in stop_sites}

    hold = net.hold_times.tolist()
    neighbours, cumulative = net.jump_table
    neighbours, cumulative = neighbours.tolist(), cumulative.tolist()

    sites, times = [site], [0.0]
    clock = 0.0
    uniforms, used = rng.random(UNIFORM_BATCH), 0
    while site not in stop:
        leave = clock + hold[site]
        if leave >= t_max:
            clock = float(t_max)
            break
        if used == UNIFORM_BATCH:
            uniforms, used = rng.random(UNIFORM_BATCH), 0
        site = neighbours[site][bisect_right(cumulative[site], uniforms[used])]
        used += 1
        clock = leave
        sites.append(site)
        times.append(clock)

    return TreeDiffusionPath(net=net, sites=np.asarray(sites, dtype=np.int64), times=np.asarray(times),
                             t_end=clock)


@dataclass(frozen=True)
class HittingSample:
    """First target hit and its time for independent paths; -1 / nan when unresolved"""

    start: int
    targets: Tuple[int, ...]
    hit_sites: np.ndarray
    hit_times: np.ndarray

    @property
    def n_paths(self) -> int:
        return len(self.hit_sites)

    @property
    def n_unresolved(self) -> int:
        return int(np.sum(self.hit_sites < 0))

    def probability(self, site: int) -> float:
        return float(np.mean(self.hit_sites == site))

    def standard_error(self, site: int) -> float:
        p = self.probability(site)
        return float(np.sqrt(p * (1.0 - p) / self.n_paths))

    def mean_time(self) -> float:
        return float(np.nanmean(self.hit_times))


def simulate_until_hit(net: MetricTreeNet, start: int, targets: Iterable[int], n_paths: int,
                       rng: np.random.Generator, max_steps: int = DEFAULT_MAX_STEPS) -> HittingSample:
    """
    Vectorized replicas run until they reach one of the target sites

    Args:
        net: Discretized tree
        start: Start site
        targets: Absorbing sites
        n_paths: Number of independent paths
        rng: Random generator
        max_steps: Lattice steps after which remaining paths are left unresolved

    Returns:
        HittingSample
    """
    targets = tuple(sorted({int(t) for t in targets}))
    if not targets:
        raise ValueError("At least one target site is required")
    if n_paths < 1:
        raise ValueError(f"n_paths must be positive, got {n_paths}")
    if not 0 <= start < net.n_sites or not all(0 <= s < net.n_sites for s in targets):
        raise ValueError(f"Sites must lie in [0, {net.n_sites})")
    is_target = np.zeros(net.n_sites, dtype=bool)
    is_target[list(targets)] = True
    hold = net.hold_times

    current = np.full(n_paths, int(start), dtype=np.int64)
    clock = np.zeros(n_paths)
    hit_sites = np.full(n_paths, -1, dtype=np.int64)
    hit_times = np.full(n_paths, np.nan)
    if is_target[start]:
        hit_sites[:], hit_times[:] = start, 0.0
        return HittingSample(int(start), targets, hit_sites, hit_times)

    active = np.arange(n_paths)
    steps = 0
    while len(active) and steps < max_steps:
        here = current[active]
        clock[active] += hold[here]
        following = net.step(here, rng.random(len(active)))
        current[active] = following
        arrived = is_target[following]
        done = active[arrived]
        hit_sites[done] = following[arrived]
        hit_times[done] = clock[done]
        active = active[~arrived]
        steps += 1
    if len(active):
        logger.warning("%d of %d paths did not reach a target within %d steps", len(active), n_paths, max_steps)
    return HittingSample(int(start), targets, hit_sites, hit_times)


@dataclass(frozen=True, eq=False)
class LocalTimeField:
    """
    Occupation of each site up to time t, crossings of each original edge and
    visits of the chain of successive distinct original vertices

    Crossings are oriented away from ``origin``, the first original vertex the
    path reached, so ``crossings - 2 * crossings_forward`` is -1 or 0.
    """

    net: MetricTreeNet
    t: float
    occupation: np.ndarray
    crossings_forward: np.ndarray
    crossings_backward: np.ndarray
    vertex_visits: np.ndarray
    origin: Optional[int] = None

    @property
    def local_time(self) -> np.ndarray:
        """Occupation divided by site weight (0 on weightless sites)"""
        weights = self.net.weights
        return np.divide(self.occupation, weights, out=np.zeros_like(self.occupation), where=weights > 0)

    @property
    def crossings(self) -> np.ndarray:
        return self.crossings_forward + self.crossings_backward

    def integral(self) -> float:
        return float(np.sum(self.local_time * self.net.weights))

    def to_frame(self) -> pd.DataFrame:
        """One row per site: site, vertex, edge, offset, weight, occupation and local time"""
        sites = np.arange(self.net.n_sites)
        frame = _site_columns(self.net, sites)
        frame.insert(4, "weight", self.net.weights)
        frame.insert(5, "occupation", self.occupation)
        frame.insert(6, "local_time", self.local_time)
        return frame

    def edge_frame(self) -> pd.DataFrame:
        rows = []
        for e, (parent, child) in enumerate(self.net.edges):
            rows.append({
                "edge": e,
                "parent": int(parent),
                "child": int(child),
                "value": float(self.net.edge_values[e]),
                "forward": int(self.crossings_forward[e]),
                "backward": int(self.crossings_backward[e]),
                "crossings": int(self.crossings[e]),
            })
        return pd.DataFrame(rows)

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False)


def local_times(path: TreeDiffusionPath, net: Optional[MetricTreeNet] = None,
                t: Optional[float] = None) -> LocalTimeField:
    """
    Local-time bookkeeping of a simulated path

    Args:
        path: Simulated path
        net: The net the path was simulated on (defaults to path.net)
        t: Time to stop counting (defaults to the end of the path)

    Returns:
        LocalTimeField
    """
    net = path.net if net is None else net
    if net is not path.net:
        raise ValueError("Path was simulated on a different net")
    t = path.t_end if t is None else float(t)
    if not 0.0 <= t <= path.t_end:
        raise ValueError(f"Time {t} outside [0, {path.t_end}]")

    count = int(np.searchsorted(path.times, t, side="right"))
    sites, arrivals = path.sites[:count], path.times[:count]
    durations = np.append(arrivals[1:], t) - arrivals
    occupation = np.bincount(sites, weights=durations, minlength=net.n_sites)

    forward = np.zeros(len(net.edges), dtype=np.int64)
    backward = np.zeros(len(net.edges), dtype=np.int64)
    chain = sites[sites < net.n_vertices]
    if len(chain):
        chain = chain[np.concatenate(([True], chain[1:] != chain[:-1]))]
    visits = np.bincount(chain, minlength=net.n_vertices).astype(np.int64)

    origin = None
    if len(chain):
        origin = int(chain[0])
        depth = nx.single_source_shortest_path_length(net.vertex_tree, origin)
        graph = net.vertex_tree
        for a, b in zip(chain[:-1].tolist(), chain[1:].tolist()):
            e = graph.edges[a, b]["edge"]
            if depth[b] > depth[a]:
                forward[e] += 1
            else:
                backward[e] += 1
    return LocalTimeField(net=net, t=t, occupation=occupation, crossings_forward=forward,
                          crossings_backward=backward, vertex_visits=visits, origin=origin)


def crossing_local_time_estimate(field: LocalTimeField, net: Optional[MetricTreeNet] = None) -> pd.DataFrame:
    """
    Local times recovered from crossing and visit counts

    Edges: resistance * crossings, compared with L_t at the edge midpoint.
    Degree-two vertices between two cut-point neighbours: 2 * R_vert * visits,
    where R_vert is the parallel resistance of the two incident edges.

    Returns:
        DataFrame with kind, id, estimate, local_time and gap columns
    """
    net = field.net if net is None else net
    if net.metric != RESISTANCE:
        raise ValueError("Crossing estimates need a net in the resistance metric")
    local = field.local_time
    rows = []
    for e in range(len(net.edges)):
        sites = net.edge_sites(e)
        midpoint = sites[len(sites) // 2]
        rows.append({"kind": "edge", "id": e, "estimate": float(net.edge_values[e] * field.crossings[e]),
                     "local_time": float(local[midpoint])})

    graph, stars = net.vertex_tree, net.tree.star_centers
    for site in range(net.n_vertices):
        neighbours = list(graph.neighbors(site))
        if len(neighbours) != 2 or any(net.tree.vertices[w] in stars for w in neighbours + [site]):
            continue
        r1, r2 = (net.edge_values[graph.edges[site, w]["edge"]] for w in neighbours)
        arm = r1 * r2 / (r1 + r2)
        rows.append({"kind": "vertex", "id": int(net.tree.vertices[site]),
                     "estimate": float(2.0 * arm * field.vertex_visits[site]), "local_time": float(local[site])})

    frame = pd.DataFrame(rows, columns=["kind", "id", "estimate", "local_time"])
    frame["gap"] = (frame["estimate"] - frame["local_time"]).abs()
    return frame


def _distance_function(tree: Union[SourceTree, MetricTreeNet], metric: str) -> Callable[[int, int], float]:
    if isinstance(tree, MetricTreeNet):
        return lambda a, b: float(tree.site_distances([a])[0, b])
    edges = source_edges(tree)
    graph = nx.Graph()
    graph.add_nodes_from(edges.vertices)
    for (u, v), w in zip(edges.edges, edges.values(metric)):
        graph.add_edge(u, v, weight=float(w))
    return lambda a, b: float(nx.shortest_path_length(graph, a, b, weight="weight"))


def hitting_probability(tree: Union[SourceTree, MetricTreeNet], start: int, first: int, second: int,
                        metric: str = LENGTH) -> float:
    """
    P_start(hit first before second) = d(b, second) / d(first, second),
    b the branch point of start, first and second

    Points are vertices of a skeleton or reduced tree, or sites of a net
    (whose own metric is used).
    """
    if first == second:
        raise ValueError("The two targets must differ")
    d = _distance_function(tree, metric)
    span = d(first, second)
    if span <= 0:
        raise StructuralError(f"Targets {first} and {second} are at distance 0")
    branch_to_second = 0.5 * (d(start, second) + span - d(start, first))
    return float(min(max(branch_to_second / span, 0.0), 1.0))


def expected_exit_time(net: MetricTreeNet, start: int, target: int) -> float:
    """
    E_start[time to hit target] = sum over sites of 2 * d(b(site, start, target), target) * weight

    Exact for the lattice walk; matches the continuum integral under Lebesgue weights.
    """
    distances = net.site_distances([start, target])
    branch_to_target = 0.5 * (distances[1] + distances[1, start] - distances[0])
    return float(2.0 * np.sum(np.maximum(branch_to_target, 0.0) * net.weights))


def vertex_chain(tree: SkeletonTree) -> pd.DataFrame:
    """
    Transition matrix of the skeleton Brownian motion watched at successive distinct cut-points

    Each row is the harmonic measure of the other cut-points seen from a
    cut-point, on the tree network with conductances 1 / resistance.

    Returns:
        DataFrame indexed and columned by the sorted cut-points V*
    """
    if not isinstance(tree, SkeletonTree):
        raise TypeError(f"Expected SkeletonTree, got {type(tree).__name__}")
    vertices = tree.vertices()
    index = {v: i for i, v in enumerate(vertices)}
    rows, cols, data = [], [], []
    for u, v, attrs in tree.graph.edges(data=True):
        if attrs["resistance"] <= 0:
            raise StructuralError(f"Edge ({u}, {v}) has non-positive resistance {attrs['resistance']}")
        rows.extend((index[u], index[v]))
        cols.extend((index[v], index[u]))
        data.extend((1.0 / attrs["resistance"],) * 2)
    size = len(vertices)
    network = ElectricalNetwork(sp.coo_matrix((data, (rows, cols)), shape=(size, size)),
                                ground=index[tree.root_star])

    states = sorted(tree.vstar)
    position = {v: i for i, v in enumerate(states)}
    matrix = np.zeros((len(states), len(states)))
    for i, x in enumerate(states):
        boundary = [index[y] for y in states if y != x]
        if not boundary:
            continue
        for b, p in network.harmonic_measure(index[x], boundary).items():
            matrix[i, position[vertices[b]]] = p
    logger.debug("Vertex chain over %d cut-points", len(states))
    return pd.DataFrame(matrix, index=states, columns=states)
