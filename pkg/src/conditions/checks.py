"""
Condition Checks - Replica sweeps estimating conditions (S), (G), (V) and (R) of a graph model
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import pandas as pd
from scipy import stats

from ..continuum import MarkedRealTree, reduce_crt, sample_normalized_excursion
from ..errors import SolverError, StructuralError
from ..graph_core import effective_resistance
from ..models import ModelSpec, sample_marks
from ..seeding import run_replicas
from ..skeleton import ReducedSpatialTree, SkeletonBuilder, SkeletonTree, reduce_skeleton
from .report import SIGNIFICANCE, ConditionReport, kendall_trend

logger = logging.getLogger(__name__)

DEFAULT_EPS = 0.1
DEFAULT_EXCURSION_STEPS = 2000

OK, NOT_TREE_LIKE, SOLVER_FAILED = "ok", "not_tree_like", "solver_failed"


def _check_grid(name: str, values: Sequence[int]) -> List[int]:
    values = sorted({int(v) for v in values})
    if not values:
        raise ValueError(f"{name} grid must not be empty")
    if any(v < 1 for v in values):
        raise ValueError(f"{name} grid values must be positive, got {values}")
    return values


def _check_replicas(replicas: int) -> None:
    if replicas < 1:
        raise ValueError(f"replicas must be positive, got {replicas}")


def _metadata(model: ModelSpec, replicas: int, seed: int, **extra) -> Dict:
    return {"model": model.to_dict(), "replicas": replicas, "seed": seed, **extra}


def _sample_skeleton(model: ModelSpec, n: int, k: int, rng: np.random.Generator):
    """
    Graph, marks, builder, skeleton and status of one replica

    The tree is None unless the status is OK.
    """
    g = model.with_size(n).generate(rng)
    builder = SkeletonBuilder(g)
    marks = sample_marks(g, builder.decompose(), k, model.mark_law, rng)
    try:
        return g, marks, builder, builder.build(marks), OK
    except StructuralError:
        return g, marks, builder, None, NOT_TREE_LIKE
    except SolverError as exc:
        logger.warning("Dropping replica with n=%d, K=%d: %s", n, k, exc)
        return g, marks, builder, None, SOLVER_FAILED


def _solver_note(failures: int) -> List[str]:
    return [f"{failures} replicas dropped after a failed linear solve"] if failures else []


# Condition (S)

def _replica_S(model: ModelSpec, n: int, k: int, rng: np.random.Generator) -> Dict:
    g, marks, builder, tree, status = _sample_skeleton(model, n, k, rng)
    row = {"n": n, "K": k, "status": status, "tree_like": tree is not None,
           "delta_zd": np.nan, "delta_intrinsic": np.nan}
    if tree is not None:
        sizes = builder.sausages()
        if sizes["delta_zd"] is not None:
            row["delta_zd"] = sizes["delta_zd"] / n ** 0.25
        row["delta_intrinsic"] = sizes["delta_intrinsic"] / n ** 0.5
    return row


def check_S(model: ModelSpec, n_grid: Sequence[int], k_grid: Sequence[int], replicas: int,
            eps: float = DEFAULT_EPS, seed: int = 0, workers: int = 1) -> ConditionReport:
    """
    Condition (S): G(K) is tree-like and the sausages shrink after rescaling

    Args:
        model: Graph model
        n_grid: Graph sizes
        k_grid: Mark counts
        replicas: Replicas per (n, K) cell
        eps: Threshold for the rescaled sausage diameters
        seed: Master seed
        workers: joblib workers

    Returns:
        ConditionReport; the verdict asks the non-tree-like probability to decrease
        in n and the sausage diameters to decrease in K
    """
    n_grid, k_grid = _check_grid("n", n_grid), _check_grid("K", k_grid)
    _check_replicas(replicas)
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    tasks = [(model, n, k) for n in n_grid for k in k_grid for _ in range(replicas)]
    frame = pd.DataFrame(run_replicas(_replica_S, tasks, seed, workers))

    cells = []
    for (n, k), group in frame.groupby(["n", "K"], sort=True):
        group = group[group["status"] != SOLVER_FAILED]
        tree_like = group[group["tree_like"]]
        cells.append({
            "n": n,
            "K": k,
            "replicas": len(group),
            "p_not_tree_like": 1.0 - group["tree_like"].mean() if len(group) else np.nan,
            "p_zd_exceeds": (tree_like["delta_zd"] > eps).mean() if tree_like["delta_zd"].notna().any() else np.nan,
            "p_intrinsic_exceeds": (tree_like["delta_intrinsic"] > eps).mean() if len(tree_like) else np.nan,
            "delta_zd_median": tree_like["delta_zd"].median(),
            "delta_intrinsic_median": tree_like["delta_intrinsic"].median(),
        })
    table = pd.DataFrame(cells)

    tests = {"tau_not_tree_like_vs_n": kendall_trend(table["n"], table["p_not_tree_like"])}
    per_n = [kendall_trend(group["K"], group["delta_intrinsic_median"]) for _, group in table.groupby("n")]
    tests["tau_intrinsic_vs_K"] = float(np.nanmean(per_n)) if np.isfinite(per_n).any() else np.nan
    per_n = [kendall_trend(group["K"], group["delta_zd_median"]) for _, group in table.groupby("n")]
    tests["tau_zd_vs_K"] = float(np.nanmean(per_n)) if np.isfinite(per_n).any() else np.nan

    increasing = [name for name, tau in tests.items() if np.isfinite(tau) and tau > 0]
    verdict = "inconclusive" if increasing else "consistent"
    notes = [f"Trend against the expected direction: {', '.join(increasing)}"] if increasing else []
    failures = int((frame["status"] == SOLVER_FAILED).sum())
    notes += _solver_note(failures)
    dropped = int((frame["status"] == NOT_TREE_LIKE).sum())
    if dropped:
        logger.warning("Condition S: %d of %d replicas had a non-tree-like G(K)", dropped, len(frame))
    return ConditionReport(condition="S", table=table, tests=tests, verdict=verdict, notes=notes,
                           metadata=_metadata(model, replicas, seed, eps=eps, dropped=dropped,
                                                 solver_failures=failures))


# Condition (G)

def _shape_signature(tree: ReducedSpatialTree) -> str:
    return f"{len(tree.branch_points())}b{len(tree.leaves())}l"


def _pair_functionals(d0: float, d1: float, branch: float) -> Dict[str, float]:
    """Scale-free functionals of the root and two marks"""
    return {
        "depth_ratio": d0 / (d0 + d1) if d0 + d1 > 0 else np.nan,
        "branch_fraction": branch / min(d0, d1) if min(d0, d1) > 0 else np.nan,
    }


def _replica_G(source: str, model: Optional[ModelSpec], n: int, k: int, steps: int,
               rng: np.random.Generator) -> Dict:
    count = max(k, 2)
    if source == "crt":
        excursion = sample_normalized_excursion(steps, rng)
        times = rng.uniform(0.0, 1.0, size=count)
        real = MarkedRealTree(excursion, tuple(times))
        d0, d1 = real.depths[0], real.depths[1]
        row = {"source": "crt", "n": n, "dropped": False, "status": OK,
               **_pair_functionals(d0, d1, real.branch_depths[0, 1])}
        reduced = reduce_crt(excursion, times[:k])
        row.update(total_length=reduced.total_length(), shape=_shape_signature(reduced), spread=np.nan)
        return row

    g, marks, _, tree, status = _sample_skeleton(model, n, count, rng)
    if tree is None:
        return {"source": "model", "n": n, "dropped": True, "status": status}
    root, x0, x1 = tree.root_star, marks[0], marks[1]
    d0, d1 = tree.distance(root, x0), tree.distance(root, x1)
    branch = 0.5 * (d0 + d1 - tree.distance(x0, x1))
    row = {"source": "model", "n": n, "dropped": False, "status": status, **_pair_functionals(d0, d1, branch)}
    reduced = reduce_skeleton(tree, marks[:k])
    row.update(total_length=reduced.total_length() / np.sqrt(n), shape=_shape_signature(reduced))
    spread = np.nan
    if tree.embedding is not None and d0 > 0:
        offset = tree.position(x0) - tree.position(root)
        spread = float(offset @ offset) / (len(offset) * d0)
    row["spread"] = spread
    return row


def _shape_pvalue(model_shapes: pd.Series, crt_shapes: pd.Series) -> float:
    counts = pd.concat([model_shapes.value_counts().rename("model"), crt_shapes.value_counts().rename("crt")],
                       axis=1).fillna(0)
    if len(counts) < 2:
        return 1.0
    return float(stats.chi2_contingency(counts.to_numpy().T)[1])


def check_G(model: ModelSpec, n_grid: Sequence[int], k: int, replicas: int, seed: int = 0, workers: int = 1,
            excursion_steps: int = DEFAULT_EXCURSION_STEPS) -> ConditionReport:
    """
    Condition (G): rescaled reduced skeletons against reduced K-CRT samples

    Depth ratios and branch fractions of two marks are compared by two-sample
    KS tests, the shape of the K-mark reduced tree by a chi-square test.
    p-values are Bonferroni-corrected over all tests of the sweep.

    Args:
        model: Graph model
        n_grid: Graph sizes
        k: Marks spanning the reduced tree
        replicas: Model replicas per n, and CRT replicas in total
        seed: Master seed
        workers: joblib workers
        excursion_steps: Grid size of the CRT excursions

    Returns:
        ConditionReport with sigma_d (mean reduced length ratio) and
        sigma_phi (embedding spread per unit length) at the largest n
    """
    n_grid = _check_grid("n", n_grid)
    _check_replicas(replicas)
    if k < 1:
        raise ValueError(f"K must be at least 1, got {k}")
    tasks = [("model", model, n, k, excursion_steps) for n in n_grid for _ in range(replicas)]
    tasks += [("crt", None, 0, k, excursion_steps) for _ in range(replicas)]
    frame = pd.DataFrame(run_replicas(_replica_G, tasks, seed, workers))

    crt = frame[frame["source"] == "crt"]
    models = frame[frame["source"] == "model"]
    dropped = int(models["dropped"].sum())
    failures = int((models["status"] == SOLVER_FAILED).sum())
    models = models[~models["dropped"].astype(bool)]
    if dropped:
        logger.warning("Condition G: dropped %d replicas with a non-tree-like G(K)", dropped)

    cells, raw_pvalues = [], []
    for n in n_grid:
        sample = models[models["n"] == n]
        cell = {"n": n, "replicas": int(len(sample)), "dropped": int(replicas - len(sample))}
        for name in ("depth_ratio", "branch_fraction"):
            ours, theirs = sample[name].dropna(), crt[name].dropna()
            cell[f"p_{name}"] = float(stats.ks_2samp(ours, theirs).pvalue) if len(ours) and len(theirs) else np.nan
        cell["p_shape"] = _shape_pvalue(sample["shape"], crt["shape"]) if k >= 2 and len(sample) else np.nan
        crt_length = crt["total_length"].mean()
        cell["sigma_d_hat"] = sample["total_length"].mean() / crt_length if crt_length > 0 else np.nan
        spread = sample["spread"].dropna()
        cell["sigma_phi_hat"] = float(np.sqrt(spread.mean())) if len(spread) else np.nan
        raw_pvalues += [cell[c] for c in ("p_depth_ratio", "p_branch_fraction", "p_shape") if np.isfinite(cell[c])]
        cells.append(cell)
    table = pd.DataFrame(cells)

    n_tests = max(len(raw_pvalues), 1)
    corrected = min(1.0, min(raw_pvalues) * n_tests) if raw_pvalues else np.nan
    tests = {"min_corrected_p": corrected, "n_tests": n_tests}
    verdict = "consistent" if np.isfinite(corrected) and corrected > SIGNIFICANCE else "rejected"
    if not np.isfinite(corrected):
        verdict = "inconclusive"
    largest = table.iloc[-1]
    constants = {"sigma_d": float(largest["sigma_d_hat"]), "sigma_phi": float(largest["sigma_phi_hat"])}
    notes = ["Marginal functionals only: passing is necessary, not sufficient, for convergence in D"]
    notes += _solver_note(failures)
    return ConditionReport(condition="G", table=table, constants=constants, tests=tests, verdict=verdict,
                           notes=notes, metadata=_metadata(model, replicas, seed, K=k, dropped=dropped,
                                                 solver_failures=failures))


# Condition (V)

def volume_discrepancy(tree: SkeletonTree, n: int) -> Tuple[float, float]:
    """
    Sup over skeleton vertices x of |nu * lambda(desc x) - mu(desc x)|

    lambda is the length measure normalized to total mass one; the closed
    subtree below x keeps the edge from x to its parent. mu is the projected
    measure divided by n, and nu its total mass.

    Returns:
        (sup statistic, nu)
    """
    nu = sum(tree.measure.values()) / n
    total = tree.total_length()
    if total <= 0:
        return 0.0, float(nu)
    parent = tree.parent
    below_length = {v: 0.0 for v in tree.graph.nodes}
    below_mass = {v: tree.measure.get(v, 0) / n for v in tree.graph.nodes}
    worst = 0.0
    for v in nx.dfs_postorder_nodes(tree.graph, tree.root_star):
        p = parent[v]
        closed = below_length[v] + (tree.edge_data(p, v)["length"] if p >= 0 else 0.0)
        worst = max(worst, abs(nu * closed / total - below_mass[v]))
        if p >= 0:
            below_length[p] += closed
            below_mass[p] += below_mass[v]
    return float(worst), float(nu)


def _replica_V(model: ModelSpec, n: int, k: int, rng: np.random.Generator) -> Dict:
    g, _, _, tree, status = _sample_skeleton(model, n, k, rng)
    if tree is None:
        return {"n": n, "K": k, "dropped": True, "status": status, "sup": np.nan, "nu": np.nan,
                "nu_enumerated": np.nan}
    sup, nu = volume_discrepancy(tree, n)
    return {"n": n, "K": k, "dropped": False, "status": status, "sup": sup, "nu": nu,
            "nu_enumerated": 2 * g.n_edges / n}


def check_V(model: ModelSpec, n_grid: Sequence[int], k_grid: Sequence[int], replicas: int, seed: int = 0,
            workers: int = 1) -> ConditionReport:
    """
    Condition (V): the projected measure spreads like the length measure

    Returns:
        ConditionReport with sup-discrepancy quantiles per (n, K) and nu at the largest n
    """
    n_grid, k_grid = _check_grid("n", n_grid), _check_grid("K", k_grid)
    _check_replicas(replicas)
    tasks = [(model, n, k) for n in n_grid for k in k_grid for _ in range(replicas)]
    frame = pd.DataFrame(run_replicas(_replica_V, tasks, seed, workers))
    dropped = int(frame["dropped"].sum())
    failures = int((frame["status"] == SOLVER_FAILED).sum())
    kept = frame[~frame["dropped"].astype(bool)]

    cells = []
    for (n, k), group in kept.groupby(["n", "K"], sort=True):
        cells.append({
            "n": n,
            "K": k,
            "replicas": len(group),
            "sup_median": group["sup"].median(),
            "sup_q90": group["sup"].quantile(0.9),
            "nu_mean": group["nu"].mean(),
            "nu_cv": group["nu"].std(ddof=1) / group["nu"].mean() if len(group) > 1 else np.nan,
            "nu_enumerated": group["nu_enumerated"].mean(),
        })
    table = pd.DataFrame(cells)
    if table.empty:
        return ConditionReport(condition="V", table=table, verdict="inconclusive",
                               notes=["Every replica was dropped"] + _solver_note(failures),
                               metadata=_metadata(model, replicas, seed, dropped=dropped, solver_failures=failures))

    per_k = [kendall_trend(group["n"], group["sup_median"]) for _, group in table.groupby("K")]
    tau = float(np.nanmean(per_k)) if np.isfinite(per_k).any() else np.nan
    tests = {"tau_sup_vs_n": tau}
    verdict = "consistent" if not np.isfinite(tau) or tau < 0 else "inconclusive"
    largest = table[table["n"] == table["n"].max()]
    constants = {"nu": float(largest["nu_mean"].mean()), "nu_cv": float(largest["nu_cv"].mean())}
    return ConditionReport(condition="V", table=table, constants=constants, tests=tests, verdict=verdict,
                           notes=_solver_note(failures),
                           metadata=_metadata(model, replicas, seed, dropped=dropped, solver_failures=failures))


# Condition (R)

def _spread(ratios: pd.Series) -> float:
    """Coefficient of variation, with solver round-off counted as zero"""
    if len(ratios) < 2:
        return np.nan
    cv = float(ratios.std(ddof=1) / ratios.mean())
    return 0.0 if cv < 1e-9 else cv


def _replica_R(model: ModelSpec, n: int, rng: np.random.Generator) -> Dict:
    g = model.with_size(n).generate(rng)
    builder = SkeletonBuilder(g)
    mark = sample_marks(g, builder.decompose(), 1, model.mark_law, rng)[0]
    if mark == g.root:
        return {"n": n, "ratio": np.nan}
    return {"n": n, "ratio": effective_resistance(g, g.root, mark) / g.distance(g.root, mark)}


def check_R(model: ModelSpec, n_grid: Sequence[int], replicas: int, seed: int = 0,
            workers: int = 1) -> ConditionReport:
    """
    Condition (R): effective resistance to a mark against its graph distance

    The ratio lies in (0, 1] on every graph and equals 1 on trees.

    Returns:
        ConditionReport with rho (median ratio at the largest n)
    """
    n_grid = _check_grid("n", n_grid)
    _check_replicas(replicas)
    tasks = [(model, n) for n in n_grid for _ in range(replicas)]
    frame = pd.DataFrame(run_replicas(_replica_R, tasks, seed, workers)).dropna()

    cells = []
    for n, group in frame.groupby("n", sort=True):
        ratios = group["ratio"]
        cells.append({
            "n": n,
            "replicas": len(group),
            "rho_median": ratios.median(),
            "ratio_min": ratios.min(),
            "ratio_max": ratios.max(),
            "ratio_cv": _spread(ratios),
        })
    table = pd.DataFrame(cells)
    if table.empty:
        return ConditionReport(condition="R", table=table, verdict="inconclusive",
                               notes=["Every mark fell on the root"], metadata=_metadata(model, replicas, seed))

    in_range = bool(((frame["ratio"] > 0) & (frame["ratio"] <= 1.0 + 1e-9)).all())
    tau = kendall_trend(table["n"], table["ratio_cv"])
    tests = {"ratios_in_unit_interval": float(in_range), "tau_cv_vs_n": tau}
    verdict = "consistent" if in_range and (not np.isfinite(tau) or tau <= 0) else "inconclusive"
    if not in_range:
        logger.warning("Condition R: resistance/distance ratio left (0, 1]")
    constants = {"rho": float(table.iloc[-1]["rho_median"])}
    return ConditionReport(condition="R", table=table, constants=constants, tests=tests, verdict=verdict,
                           metadata=_metadata(model, replicas, seed))
