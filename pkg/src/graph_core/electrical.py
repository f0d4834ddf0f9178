"""
Electrical quantities on conductance networks: effective resistance,
harmonic measures, triangle conductances and hitting-time moments
"""
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from scipy.special import comb

from ..errors import SolverError
from .rooted_graph import RootedGraph

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10


def _factorize(matrix: sp.spmatrix):
    try:
        return splu(sp.csc_matrix(matrix))
    except RuntimeError as exc:
        raise SolverError(f"Singular system of size {matrix.shape[0]}: {exc}") from exc


def _checked(values: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise SolverError("Linear solve returned non-finite values")
    return values


class ElectricalNetwork:
    """Symmetric conductance network with a grounded, factorized Laplacian"""

    def __init__(self, conductances: sp.spmatrix, ground: int = 0):
        weights = sp.csr_matrix(conductances, dtype=float)
        if weights.shape[0] != weights.shape[1]:
            raise ValueError(f"Conductance matrix must be square, got {weights.shape}")
        if (weights.data < 0).any():
            raise ValueError("Conductances must be non-negative")
        if abs(weights - weights.T).sum() > 1e-12 * max(1.0, abs(weights).sum()):
            raise ValueError("Conductance matrix must be symmetric")

        self.conductances = weights
        self.n = weights.shape[0]
        self.total_weight = np.asarray(weights.sum(axis=1)).ravel()
        self.laplacian = (sp.diags(self.total_weight) - weights).tocsr()
        self.ground = int(ground)
        self._grounded = None
        self._green = None

    @classmethod
    def from_graph(cls, g: RootedGraph) -> "ElectricalNetwork":
        return cls(g.adjacency, ground=g.root)

    # Grounded solves

    def _grounded_lu(self):
        if self._grounded is None:
            keep = np.flatnonzero(np.arange(self.n) != self.ground)
            self._keep = keep
            self._grounded = _factorize(self.laplacian[keep][:, keep])
            logger.debug("Factorized grounded Laplacian of size %d", len(keep))
        return self._grounded

    def potentials(self, current: np.ndarray) -> np.ndarray:
        """Node potentials for an injected current vector summing to zero (ground at 0 V)"""
        if self.n == 1:
            return np.zeros(1)
        lu = self._grounded_lu()
        phi = np.zeros(self.n)
        phi[self._keep] = lu.solve(np.asarray(current, dtype=float)[self._keep])
        return _checked(phi)

    def effective_resistance(self, x: int, y: int) -> float:
        if x == y:
            return 0.0
        current = np.zeros(self.n)
        current[x], current[y] = 1.0, -1.0
        phi = self.potentials(current)
        return float(phi[x] - phi[y])

    def green_matrix(self) -> np.ndarray:
        """Dense inverse of the grounded Laplacian padded with the ground row (small networks)"""
        if self._green is None:
            lu = self._grounded_lu()
            green = np.zeros((self.n, self.n))
            if self.n > 1:
                block = lu.solve(np.eye(self.n - 1))
                green[np.ix_(self._keep, self._keep)] = block
            self._green = _checked(green)
        return self._green

    def resistances_from(self, x: int) -> np.ndarray:
        """Effective resistances R(x, z) for every z"""
        green = self.green_matrix()
        diagonal = np.diag(green)
        return diagonal[x] + diagonal - 2.0 * green[x]

    # Dirichlet problems

    def _interior_component(self, source: int, boundary: Iterable[int]) -> np.ndarray:
        """Vertices reachable from source without entering the boundary"""
        blocked = np.zeros(self.n, dtype=bool)
        blocked[list(boundary)] = True
        seen = np.zeros(self.n, dtype=bool)
        seen[source] = True
        stack = [source]
        indptr, indices = self.conductances.indptr, self.conductances.indices
        while stack:
            u = stack.pop()
            for w in indices[indptr[u]:indptr[u + 1]]:
                if not seen[w] and not blocked[w]:
                    seen[w] = True
                    stack.append(w)
        return np.flatnonzero(seen)

    def harmonic_measure(self, source: int, boundary: Iterable[int]) -> Dict[int, float]:
        """
        Exit distribution on the boundary for the walk started at source

        The walk jumps with probability proportional to conductance; the
        source itself is not absorbing, so returns to it are allowed.

        Args:
            source: Start vertex (not in boundary)
            boundary: Absorbing vertex set

        Returns:
            Mapping boundary vertex -> probability of being the first boundary vertex hit
        """
        boundary = sorted(set(int(b) for b in boundary))
        if source in boundary:
            return {int(source): 1.0}
        interior = self._interior_component(source, boundary)
        lu = _factorize(self.laplacian[interior][:, interior])
        unit = np.zeros(len(interior))
        unit[np.searchsorted(interior, source)] = 1.0
        green_row = _checked(lu.solve(unit))
        exits = self.conductances[interior][:, boundary]
        measure = np.asarray(exits.T @ green_row).ravel()
        return {b: float(p) for b, p in zip(boundary, measure) if p > 0.0}

    def expected_exit_time(self, source: int, absorbing: Iterable[int]) -> float:
        """Expected number of steps of the conductance walk from source until it hits the absorbing set"""
        absorbing = set(int(a) for a in absorbing)
        if source in absorbing:
            return 0.0
        interior = self._interior_component(source, absorbing)
        lu = _factorize(self.laplacian[interior][:, interior])
        times = _checked(lu.solve(self.total_weight[interior]))
        return float(times[np.searchsorted(interior, source)])


def effective_resistance(g: RootedGraph, x: int, y: int) -> float:
    """
    Effective resistance between x and y in the unit-conductance network

    Trees short-circuit to the graph distance; R(x, x) is 0 by convention.
    """
    if x == y:
        return 0.0
    if g.is_tree:
        return float(g.distance(x, y))
    return g.network.effective_resistance(x, y)


@dataclass(frozen=True)
class TriangleConductances:
    """Pairwise conductances of the three-terminal network reduced onto (x, y, z)"""

    vertices: Tuple[int, int, int]
    xy: float
    yz: float
    zx: float

    def resistances(self) -> Tuple[float, float, float]:
        return 1.0 / self.xy, 1.0 / self.yz, 1.0 / self.zx

    def star_arms(self) -> Tuple[float, float, float]:
        """Arm resistances of the equivalent star, in (x, y, z) order"""
        return star_triangle_arms(*self.resistances())


def star_triangle_arms(r_xy: float, r_yz: float, r_zx: float) -> Tuple[float, float, float]:
    """
    Delta-to-wye transformation

    Args:
        r_xy, r_yz, r_zx: Triangle resistances

    Returns:
        Star arm resistances (r_x, r_y, r_z)
    """
    total = r_xy + r_yz + r_zx
    if total <= 0:
        raise ValueError("Triangle resistances must have a positive sum")
    return r_xy * r_zx / total, r_xy * r_yz / total, r_yz * r_zx / total


def triangle_arm_conductances(g: RootedGraph, x: int, y: int, z: int) -> TriangleConductances:
    """
    Triangle conductances C(u, v) = deg(u) P_u[T_v < T_w and T_v < T_u^+]

    One Dirichlet solve per target vertex gives the escape currents at the
    two other corners; reversibility makes C(u, v) = C(v, u).
    """
    corners = (int(x), int(y), int(z))
    if len(set(corners)) != 3:
        raise ValueError(f"Triangle corners must be distinct, got {corners}")

    adjacency = g.adjacency
    n = g.n_vertices
    interior = np.setdiff1d(np.arange(n), np.array(corners))
    lu = _factorize(g.network.laplacian[interior][:, interior]) if len(interior) else None

    # currents[a][b]: current leaving corner a when b is held at 1 and the rest at 0
    currents = {}
    for target in corners:
        h = np.zeros(n)
        h[target] = 1.0
        if lu is not None:
            rhs = np.asarray(adjacency[interior][:, [target]].todense()).ravel()
            h[interior] = _checked(lu.solve(rhs))
        for source in corners:
            if source != target:
                row = adjacency.getrow(source)
                currents[(source, target)] = float(row.data @ h[row.indices])

    pairs = [(corners[0], corners[1]), (corners[1], corners[2]), (corners[2], corners[0])]
    values = []
    for a, b in pairs:
        forward, backward = currents[(a, b)], currents[(b, a)]
        if not np.isclose(forward, backward, rtol=1e-8, atol=1e-12):
            raise SolverError(f"Reversibility check failed for ({a}, {b}): {forward} vs {backward}")
        if forward <= 0:
            raise SolverError(f"Corners {a} and {b} are not connected avoiding the third corner")
        values.append(0.5 * (forward + backward))
    return TriangleConductances(vertices=corners, xy=values[0], yz=values[1], zx=values[2])


@dataclass(frozen=True)
class HittingMoments:
    """Exact moments E_source[T_target^k] for k = 1..max_order"""

    source: int
    target: int
    moments: Tuple[float, ...]

    def __getitem__(self, order: int) -> float:
        return self.moments[order - 1]


def hitting_time_moments(g: RootedGraph, x: int, y: int, max_order: int = 4) -> HittingMoments:
    """
    Moments of the hitting time of y by the simple random walk from x

    With Q the walk restricted to the non-absorbed states, the moment
    vectors satisfy (I - Q) m_k = 1 + sum_{j<k} C(k, j) Q m_j.

    Args:
        g: Connected rooted graph
        x: Start vertex
        y: Target vertex
        max_order: Highest moment to compute

    Returns:
        HittingMoments with max_order entries
    """
    if x == y:
        raise ValueError("Hitting-time moments need distinct source and target")
    if max_order < 1:
        raise ValueError(f"max_order must be at least 1, got {max_order}")

    states = np.flatnonzero(np.arange(g.n_vertices) != y)
    transition = sp.diags(1.0 / g.degrees) @ g.adjacency
    q = sp.csr_matrix(transition[states][:, states])
    lu = _factorize(sp.identity(len(states), format="csc") - q)

    moments: List[np.ndarray] = []
    for k in range(1, max_order + 1):
        rhs = np.ones(len(states))
        for j in range(1, k):
            rhs += comb(k, j, exact=True) * (q @ moments[j - 1])
        moments.append(_checked(lu.solve(rhs)))

    position = int(np.searchsorted(states, x))
    values = tuple(float(m[position]) for m in moments)
    return HittingMoments(source=int(x), target=int(y), moments=values)


def commute_time(g: RootedGraph, x: int, y: int) -> float:
    """E_x[T_y] + E_y[T_x] from exact first moments"""
    if x == y:
        return 0.0
    return hitting_time_moments(g, x, y, 1)[1] + hitting_time_moments(g, y, x, 1)[1]
