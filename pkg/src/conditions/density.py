"""
delta-density of a larger mark set inside the skeleton of a smaller one
"""
import logging
from itertools import combinations
from typing import Dict, List, Sequence, Set

import numpy as np
import pandas as pd

from ..errors import SolverError, StructuralError
from ..models import ModelSpec, sample_marks
from ..seeding import run_replicas
from ..skeleton import SkeletonBuilder, SkeletonTree, reduce_skeleton
from .report import ConditionReport, kendall_trend

logger = logging.getLogger(__name__)


def _coarse_vertices(tree: SkeletonTree, marks_k: Sequence[int]) -> Set[int]:
    """Cut-points on the paths from root* to the coarse marks"""
    coarse = {tree.root_star}
    for x in marks_k:
        coarse.update(v for v in tree.ancestors(int(x)) if not tree.is_star_center(v))
    return coarse


def project_marks(tree: SkeletonTree, marks_k: Sequence[int], marks_kprime: Sequence[int]) -> Dict[int, int]:
    """
    Project every fine mark onto the coarse skeleton

    The projection of y is the last coarse cut-point on the path from
    root* to y, so coarse marks project to themselves.

    Returns:
        Mapping from fine mark to its projection
    """
    coarse = _coarse_vertices(tree, marks_k)
    projection = {}
    for y in marks_kprime:
        projection[int(y)] = next(v for v in tree.ancestors(int(y)) if v in coarse)
    return projection


def check_delta_dense(tree: SkeletonTree, marks_k: Sequence[int], marks_kprime: Sequence[int],
                      delta: float) -> bool:
    """
    Whether the fine marks are delta-dense in the coarse skeleton

    Both conditions are checked on the fine skeleton ``tree``:
    every edge of the coarse reduced tree with interior cut-points carries a
    projected mark strictly inside it, and every two neighbouring projected
    points have fine marks projecting onto them within distance delta.
    root* counts as a mark projecting onto itself.

    Args:
        tree: Skeleton built from marks_kprime
        marks_k: Coarse marks
        marks_kprime: Fine marks, a superset of marks_k
        delta: Distance threshold in skeleton length units

    Returns:
        True when both conditions hold
    """
    if not set(int(x) for x in marks_k) <= set(int(y) for y in marks_kprime):
        raise ValueError("Coarse marks must be a subset of the fine marks")
    if delta < 0:
        raise ValueError(f"delta must be non-negative, got {delta}")

    coarse = _coarse_vertices(tree, marks_k)
    projection = project_marks(tree, marks_k, marks_kprime)
    representatives: Dict[int, List[int]] = {tree.root_star: [tree.root_star]}
    for y, x in projection.items():
        representatives.setdefault(x, []).append(y)
    points = set(representatives)

    reduced = reduce_skeleton(tree, list(dict.fromkeys(int(x) for x in marks_k)))
    for p, c in reduced.edges():
        interior = [v for v in tree.path(reduced.labels[p], reduced.labels[c])[1:-1] if v in coarse]
        if interior and not points.intersection(interior):
            logger.debug("Edge %s-%s carries no projected mark", reduced.labels[p], reduced.labels[c])
            return False

    for x, y in combinations(sorted(points), 2):
        if points.intersection(tree.path(x, y)[1:-1]):
            continue
        gap = min(tree.distance(a, b) for a in representatives[x] for b in representatives[y])
        if gap > delta:
            logger.debug("Neighbours %d and %d are %.3g apart", x, y, gap)
            return False
    return True


def _replica_dense(model: ModelSpec, n: int, k: int, kprime_grid: Sequence[int], delta: float,
                   rng: np.random.Generator) -> List[Dict]:
    g = model.with_size(n).generate(rng)
    builder = SkeletonBuilder(g)
    marks = sample_marks(g, builder.decompose(), max(kprime_grid), model.mark_law, rng)
    rows = []
    for kprime in kprime_grid:
        try:
            tree = builder.build(marks[:kprime])
        except (StructuralError, SolverError):
            rows.append({"K_prime": kprime, "dense": np.nan})
            continue
        dense = check_delta_dense(tree, marks[:k], marks[:kprime], delta * np.sqrt(n))
        rows.append({"K_prime": kprime, "dense": float(dense)})
    return rows


def check_dense_trend(model: ModelSpec, n: int, k: int, kprime_grid: Sequence[int], delta: float,
                      replicas: int, seed: int = 0, workers: int = 1) -> ConditionReport:
    """
    Empirical probability that K' marks are delta-dense in the K-mark skeleton

    delta is given in rescaled units and multiplied by sqrt(n). The
    probability should increase with K'.

    Returns:
        ConditionReport with one row per K' and the Kendall tau of the trend
    """
    kprime_grid = sorted({int(v) for v in kprime_grid})
    if not kprime_grid:
        raise ValueError("K' grid must not be empty")
    if k < 1 or kprime_grid[0] < k:
        raise ValueError(f"Need 1 <= K <= every K', got K={k} and K'={kprime_grid}")
    if replicas < 1:
        raise ValueError(f"replicas must be positive, got {replicas}")
    tasks = [(model, n, k, kprime_grid, delta) for _ in range(replicas)]
    frame = pd.DataFrame([row for rows in run_replicas(_replica_dense, tasks, seed, workers) for row in rows])

    cells = []
    for kprime, group in frame.groupby("K_prime", sort=True):
        valid = group["dense"].dropna()
        cells.append({"K_prime": kprime, "replicas": len(valid),
                      "p_dense": valid.mean() if len(valid) else np.nan})
    table = pd.DataFrame(cells)
    tau = kendall_trend(table["K_prime"], table["p_dense"])
    tests = {"tau_dense_vs_Kprime": tau}
    verdict = "consistent" if not np.isfinite(tau) or tau > 0 else "inconclusive"
    metadata = {"model": model.to_dict(), "n": n, "K": k, "delta": delta, "replicas": replicas, "seed": seed}
    return ConditionReport(condition="dense", table=table, tests=tests, verdict=verdict, metadata=metadata)
