"""
Checkers for the hitting-time variance bounds and the stopped-sum fourth-moment bound
"""
import logging
from dataclasses import asdict, dataclass
from typing import Dict, Optional

import numpy as np

from .electrical import effective_resistance, hitting_time_moments
from .rooted_graph import RootedGraph

logger = logging.getLogger(__name__)

FOURTH_MOMENT_CONSTANT = 148.0

HEAVY_TAILED_LAWS = {"cauchy", "student_t", "pareto", "levy"}


@dataclass(frozen=True)
class VarianceCheck:
    lhs: float
    rhs: float
    holds: bool

    def as_dict(self) -> Dict:
        return asdict(self)


def verify_variance_bound(g: RootedGraph, x: int, y: int) -> VarianceCheck:
    """
    Check E_x[T_y^2] + E_y[T_x^2] <= 16 |E|^2 diam(G) R_eff(x, y)

    Args:
        g: Connected rooted graph
        x, y: Distinct vertices

    Returns:
        VarianceCheck with both sides of the inequality
    """
    if x == y:
        raise ValueError("Variance bound needs distinct vertices")
    lhs = hitting_time_moments(g, x, y, 2)[2] + hitting_time_moments(g, y, x, 2)[2]
    rhs = 16.0 * g.n_edges ** 2 * g.diameter() * effective_resistance(g, x, y)
    return VarianceCheck(lhs=float(lhs), rhs=float(rhs), holds=bool(lhs <= rhs * (1 + 1e-12)))


def verify_variance_proposition(g: RootedGraph, x: int, y: int) -> VarianceCheck:
    """
    Check the normalised form the corollary is derived from:
    (E_x T_y^2 + E_y T_x^2) / (commute time)^2 <= 2 E_pi[R(x, .) + R(., y)] / R(x, y)
    """
    if x == y:
        raise ValueError("Variance proposition needs distinct vertices")
    forward, backward = hitting_time_moments(g, x, y, 2), hitting_time_moments(g, y, x, 2)
    commute = forward[1] + backward[1]
    lhs = (forward[2] + backward[2]) / commute ** 2

    stationary = g.degrees / (2.0 * g.n_edges)
    network = g.network
    spread = stationary @ (network.resistances_from(x) + network.resistances_from(y))
    rhs = 2.0 * spread / network.effective_resistance(x, y)
    return VarianceCheck(lhs=float(lhs), rhs=float(rhs), holds=bool(lhs <= rhs * (1 + 1e-12)))


@dataclass(frozen=True)
class IncrementLaw:
    """Centred increment law with known second and fourth moments"""

    name: str
    scale: float = 1.0

    def __post_init__(self):
        if self.name in HEAVY_TAILED_LAWS:
            raise ValueError(f"Increment law '{self.name}' is heavy-tailed; a finite fourth moment is required")
        if self.name not in {"rademacher", "zero", "gaussian", "uniform"}:
            raise ValueError(f"Unknown increment law: {self.name}")
        if self.scale < 0:
            raise ValueError(f"Scale must be non-negative, got {self.scale}")

    @property
    def m2(self) -> float:
        s2 = self.scale ** 2
        return {"rademacher": s2, "zero": 0.0, "gaussian": s2, "uniform": s2 / 3.0}[self.name]

    @property
    def m4(self) -> float:
        s4 = self.scale ** 4
        return {"rademacher": s4, "zero": 0.0, "gaussian": 3.0 * s4, "uniform": s4 / 5.0}[self.name]

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.name == "rademacher":
            return self.scale * (2.0 * rng.integers(0, 2, size=shape) - 1.0)
        if self.name == "gaussian":
            return rng.normal(0.0, self.scale, size=shape)
        if self.name == "uniform":
            return rng.uniform(-self.scale, self.scale, size=shape)
        return np.zeros(shape)


@dataclass(frozen=True)
class StoppingRule:
    """
    Stopping time for the partial sums

    kinds:
        fixed: tau = n
        geometric: tau = min(Geometric(p), cap), independent of the increments
        exit: tau = first k with |S_k| >= level, or cap
    """

    kind: str
    n: Optional[int] = None
    p: Optional[float] = None
    cap: Optional[int] = None
    level: Optional[float] = None

    def __post_init__(self):
        if self.kind == "fixed":
            if not self.n or self.n < 1:
                raise ValueError("Fixed stopping rule needs n >= 1")
        elif self.kind == "geometric":
            if self.p is None or not 0 < self.p <= 1 or not self.cap or self.cap < 1:
                raise ValueError("Geometric stopping rule needs 0 < p <= 1 and cap >= 1")
        elif self.kind == "exit":
            if self.level is None or self.level <= 0 or not self.cap or self.cap < 1:
                raise ValueError("Exit stopping rule needs level > 0 and cap >= 1")
        else:
            raise ValueError(f"Unknown stopping rule: {self.kind}")

    @property
    def max_steps(self) -> int:
        return int(self.n if self.kind == "fixed" else self.cap)

    def stop(self, partial_sums: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Stopping index (1-based step count) for each row of partial sums"""
        rows = partial_sums.shape[0]
        if self.kind == "fixed":
            return np.full(rows, self.n, dtype=np.int64)
        if self.kind == "geometric":
            return np.minimum(rng.geometric(self.p, size=rows), self.cap).astype(np.int64)
        crossed = np.abs(partial_sums) >= self.level
        first = np.argmax(crossed, axis=1) + 1
        return np.where(crossed.any(axis=1), first, self.cap).astype(np.int64)


def fixed_horizon_fourth_moment(law: IncrementLaw, n: int) -> float:
    """Exact E[S_n^4] = n m4 + 3 n (n - 1) m2^2"""
    return n * law.m4 + 3.0 * n * (n - 1) * law.m2 ** 2


@dataclass(frozen=True)
class FourthMomentCheck:
    lhs_estimate: float
    lhs_stderr: float
    rhs: float
    C_used: float
    holds: bool
    mean_tau: float
    mean_tau_sq: float
    wald_first: float
    wald_second: float
    wald_second_expected: float
    exact_fixed: Optional[float]
    trials: int

    def as_dict(self) -> Dict:
        return asdict(self)


def verify_fourth_moment_bound(sample_law: IncrementLaw, stopping_rule: StoppingRule, trials: int,
                               rng: np.random.Generator, batch_size: int = 20_000) -> FourthMomentCheck:
    """
    Monte Carlo check of E[S_tau^4] <= C (m2^2 E[tau^2] + m4 E[tau]) with C = 148

    Args:
        sample_law: Centred increment law
        stopping_rule: Stopping time for the partial sums
        trials: Number of independent stopped sums
        rng: Random generator
        batch_size: Upper bound on rows simulated at once

    Returns:
        FourthMomentCheck including Wald-identity diagnostics
    """
    if trials < 1:
        raise ValueError(f"Trials must be positive, got {trials}")

    horizon = stopping_rule.max_steps
    rows_per_batch = max(1, min(batch_size, 2_000_000 // horizon))
    s1 = s2 = s4 = s8 = t1 = t2 = 0.0

    done = 0
    while done < trials:
        rows = min(rows_per_batch, trials - done)
        increments = sample_law.sample(rng, (rows, horizon))
        partial = np.cumsum(increments, axis=1)
        tau = stopping_rule.stop(partial, rng)
        stopped = partial[np.arange(rows), tau - 1]
        fourth = stopped ** 4
        s1 += stopped.sum()
        s2 += (stopped ** 2).sum()
        s4 += fourth.sum()
        s8 += (fourth ** 2).sum()
        t1 += tau.sum()
        t2 += (tau.astype(float) ** 2).sum()
        done += rows

    lhs = s4 / trials
    variance = max(s8 / trials - lhs ** 2, 0.0)
    if stopping_rule.kind == "fixed":
        mean_tau, mean_tau_sq = float(stopping_rule.n), float(stopping_rule.n) ** 2
        exact = fixed_horizon_fourth_moment(sample_law, stopping_rule.n)
    else:
        mean_tau, mean_tau_sq = t1 / trials, t2 / trials
        exact = None

    rhs = FOURTH_MOMENT_CONSTANT * (sample_law.m2 ** 2 * mean_tau_sq + sample_law.m4 * mean_tau)
    logger.debug("Fourth moment: lhs=%.4g rhs=%.4g over %d trials", lhs, rhs, trials)
    return FourthMomentCheck(
        lhs_estimate=float(lhs),
        lhs_stderr=float(np.sqrt(variance / trials)),
        rhs=float(rhs),
        C_used=FOURTH_MOMENT_CONSTANT,
        holds=bool(lhs <= rhs),
        mean_tau=float(mean_tau),
        mean_tau_sq=float(mean_tau_sq),
        wald_first=float(s1 / trials),
        wald_second=float(s2 / trials),
        wald_second_expected=float(sample_law.m2 * mean_tau),
        exact_fixed=exact,
        trials=int(trials),
    )
