"""
Skeleton Walks experiment runner
Command-line entry point for the simulation pipelines
"""
import argparse
import logging
import sys
import os
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.conditions import check_dense_trend, check_G, check_R, check_S, check_V  # noqa: E402
from src.errors import (ConfigError, InsufficientDataError, SkeletonWalksError, SolverError,  # noqa: E402
                        StructuralError)
from src.graph_core import (FOURTH_MOMENT_CONSTANT, IncrementLaw, RootedGraph, StoppingRule,  # noqa: E402
                            commute_time, effective_resistance, find_cut_decomposition,
                            fixed_horizon_fourth_moment, verify_fourth_moment_bound, verify_variance_bound,
                            verify_variance_proposition, write_edge_list)
from src.models import ModelSpec, sample_marks  # noqa: E402
from src.seeding import run_replicas  # noqa: E402
from src.skeleton import SkeletonBuilder, SkeletonTree  # noqa: E402
from src.tree_bm import (RESISTANCE, crossing_local_time_estimate, discretize, expected_exit_time,  # noqa: E402
                         hitting_probability, local_times, segment_tree, simulate, simulate_until_hit,
                         source_edges, star_tree)
from src.walks import WalkTrace, exponent_stats, srw, time_change_profiles  # noqa: E402

from runner.utils.config_loader import SUBCOMMANDS, ExperimentConfig, load_config  # noqa: E402
from runner.utils.report_processor import ReportProcessor  # noqa: E402
from runner.utils.visualizations import ReportVisualizations  # noqa: E402

logger = logging.getLogger("runner")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

CONDITION_HEATMAPS = {
    "S": ("p_not_tree_like", "Share of non tree-like G(K)"),
    "V": ("sup_median", "Median volume discrepancy"),
}


def _sample_tree(model: ModelSpec, n: int, k: int, rng: np.random.Generator) -> Tuple[RootedGraph, SkeletonTree,
                                                                                         SkeletonBuilder]:
    """Graph, skeleton and builder for K fresh marks; StructuralError when G(K) is not tree-like"""
    g = model.with_size(n).generate(rng)
    builder = SkeletonBuilder(g)
    marks = sample_marks(g, builder.decompose(), k, model.mark_law, rng)
    return g, builder.build(marks), builder


# Replica workers (module level so joblib can pickle them)

def _generate_replica(model: ModelSpec, rng: np.random.Generator) -> RootedGraph:
    return model.generate(rng)


def _skeleton_replica(model: ModelSpec, n: int, k: int, rng: np.random.Generator) -> Dict:
    try:
        g, tree, builder = _sample_tree(model, n, k, rng)
    except StructuralError as exc:
        return {"row": {"n": n, "K": k, "status": "not_tree_like", "tree_like": False, "note": str(exc)},
                "tree": None, "newick": None}
    except SolverError as exc:
        logger.warning("Dropping skeleton replica with n=%d, K=%d: %s", n, k, exc)
        return {"row": {"n": n, "K": k, "status": "solver_failed", "tree_like": None, "note": str(exc)},
                "tree": None, "newick": None}
    row = {"n": n, "K": k, "status": "ok", "tree_like": True, "note": ""}
    row.update(builder.summary())
    sausages = builder.sausages()
    row["delta_zd"] = sausages["delta_zd"]
    row["delta_intrinsic"] = sausages["delta_intrinsic"]
    return {"row": row, "tree": tree.to_dict(), "newick": builder.reduce().to_newick()}


def _walk_replica(model: ModelSpec, n: int, steps: int, rng: np.random.Generator) -> WalkTrace:
    return srw(model.with_size(n).generate(rng), steps, rng)


def _time_change_replica(model: ModelSpec, n: int, k: int, steps: int, t_grid: Optional[List[float]],
                         rng: np.random.Generator) -> Dict:
    try:
        g, tree, _ = _sample_tree(model, n, k, rng)
    except StructuralError:
        return {"status": "not_tree_like", "frame": None}
    except SolverError as exc:
        logger.warning("Dropping time-change replica with n=%d: %s", n, exc)
        return {"status": "solver_failed", "frame": None}
    trace = srw(g, steps, rng)
    try:
        profile = time_change_profiles(g, tree, trace, t_grid=np.asarray(t_grid) if t_grid else None, n=n)
    except InsufficientDataError:
        return {"status": "too_few_visits", "frame": None}
    mid = len(profile.t_grid) // 2
    return {
        "status": "ok",
        "frame": profile.to_frame(),
        "slope": profile.slope,
        "ratio_cv": profile.ratio_cv,
        "mid_gap_commute": float(profile.relative_gap("commute")[mid]),
        "mid_gap_averaged": float(profile.relative_gap("averaged")[mid]),
    }


def _tree_bm_replica(model: ModelSpec, n: int, k: int, h_fractions: List[float], t_max: float,
                     rng: np.random.Generator) -> List[Dict]:
    try:
        _, tree, _ = _sample_tree(model, n, k, rng)
    except StructuralError:
        return []
    except SolverError as exc:
        logger.warning("Dropping tree-bm replica with n=%d: %s", n, exc)
        return []
    shortest = float(np.min(source_edges(tree).values(RESISTANCE)))
    t = t_max * tree.total_resistance()
    rows = []
    for fraction in h_fractions:
        try:
            net = discretize(tree, metric=RESISTANCE, h=fraction * shortest, measure="resistance")
        except (StructuralError, ValueError) as exc:
            logger.warning("Skipping skeleton with n=%d: %s", n, exc)
            return []
        field = local_times(simulate(net, t, rng))
        gaps = crossing_local_time_estimate(field)["gap"]
        rows.append({
            "n": n,
            "K": k,
            "h_fraction": fraction,
            "h": net.h,
            "t": t,
            "n_sites": net.n_sites,
            "integral_error": abs(field.integral() - t),
            "gap_median": float(gaps.median()),
            "gap_max": float(gaps.max()),
        })
    return rows


# Pipelines

def _progress(iterable, quiet: bool, desc: str):
    return tqdm(iterable, desc=desc, disable=quiet, leave=False)


def run_generate(config: ExperimentConfig, out: Path, options: argparse.Namespace) -> None:
    """Sample graphs and write them in the edge-list format"""
    graphs = run_replicas(_generate_replica, [(config.model,)] * config.replicas, config.seed, config.workers)
    rows = []
    for i, g in enumerate(_progress(graphs, options.quiet, "writing graphs")):
        name = f"graph_{i:03d}.edges"
        write_edge_list(g, out / name)
        rows.append({
            "replica": i,
            "file": name,
            "n_vertices": g.n_vertices,
            "n_edges": g.n_edges,
            "n_cut_points": len(find_cut_decomposition(g).cut_points),
            "is_tree": g.is_tree,
            "dimension": g.dimension or 1,
        })
    ReportProcessor.write_table(pd.DataFrame(rows), out / "generate.csv")
    print(f"✓ Wrote {len(graphs)} {config.model.family} graphs of size {config.model.n}")


def run_skeleton(config: ExperimentConfig, out: Path, options: argparse.Namespace) -> None:
    """Build skeletons over the (n, K) grid; keep the first replica's tree per cell"""
    meta = ReportProcessor.run_metadata(config)
    rows = []
    cells = [(n, k) for n in config.n_grid for k in config.k_grid]
    for n, k in _progress(cells, options.quiet, "skeleton cells"):
        results = run_replicas(_skeleton_replica, [(config.model, n, k)] * config.replicas, config.seed,
                               config.workers)
        for i, result in enumerate(results):
            rows.append({"replica": i, **result["row"]})
        first = next((r for r in results if r["tree"] is not None), None)
        if first is None:
            print(f"⚠ No tree-like skeleton for n={n}, K={k}")
            continue
        ReportProcessor.write_summary({**meta, "n": n, "K": k, "skeleton": first["tree"],
                                       "reduced_newick": first["newick"]}, out / f"skeleton_n{n}_K{k}.json")
    frame = pd.DataFrame(rows)
    ReportProcessor.write_table(frame, out / "skeleton.csv")
    counts = frame["status"].value_counts()
    print(f"✓ Built {int(counts.get('ok', 0))} of {len(frame)} skeletons ({len(cells)} cells)")
    if counts.get("not_tree_like", 0):
        print(f"⚠ {int(counts['not_tree_like'])} replicas were not tree-like")
    if counts.get("solver_failed", 0):
        print(f"⚠ {int(counts['solver_failed'])} replicas dropped after a failed linear solve")


def run_conditions(config: ExperimentConfig, out: Path, options: argparse.Namespace) -> None:
    """Run the selected condition checks and save one report per condition"""
    meta = ReportProcessor.run_metadata(config)
    model, seed, workers = config.model, config.seed, config.workers
    checks: Dict[str, Callable] = {
        "S": lambda: check_S(model, config.n_grid, config.k_grid, config.replicas, eps=config.eps, seed=seed,
                             workers=workers),
        "G": lambda: check_G(model, config.n_grid, max(config.k_grid), config.replicas, seed=seed,
                             workers=workers),
        "V": lambda: check_V(model, config.n_grid, config.k_grid, config.replicas, seed=seed, workers=workers),
        "R": lambda: check_R(model, config.n_grid, config.replicas, seed=seed, workers=workers),
        "dense": lambda: check_dense_trend(model, max(config.n_grid), config.k_grid[0], config.kprime_grid,
                                           config.delta, config.replicas, seed=seed, workers=workers),
    }
    for condition in _progress(config.conditions, options.quiet, "conditions"):
        report = checks[condition]()
        report.metadata.update(meta)
        report.save(out)
        mark = "✓" if report.verdict == "consistent" else "⚠"
        print(f"{mark} Condition {condition}: {report.verdict}")
        if options.plots and condition in CONDITION_HEATMAPS and len(report.table):
            column, title = CONDITION_HEATMAPS[condition]
            ReportVisualizations.plot_condition_heatmap(report.table, column, title,
                                                        out / f"condition_{condition}.svg")


def run_exponents(config: ExperimentConfig, out: Path, options: argparse.Namespace) -> None:
    """Walk on independent graphs per n and fit the displacement and return exponents"""
    tables, slopes = [], []
    for n in _progress(config.n_grid, options.quiet, "exponent sizes"):
        traces = run_replicas(_walk_replica, [(config.model, n, config.steps)] * config.replicas, config.seed,
                              config.workers)
        stats = exponent_stats(traces, n_boot=config.bootstrap, seed=config.seed)
        table = stats.table.copy()
        table.insert(0, "n", n)
        fitted = stats.slopes.reset_index()
        fitted.insert(0, "n", n)
        tables.append(table)
        slopes.append(fitted)
    table, fitted = pd.concat(tables, ignore_index=True), pd.concat(slopes, ignore_index=True)
    ReportProcessor.write_table(table, out / "exponents.csv")
    ReportProcessor.write_table(fitted, out / "exponent_slopes.csv")
    ReportProcessor.write_summary({**ReportProcessor.run_metadata(config), "slopes": fitted.to_dict(orient="records")},
                                  out / "exponents.json")
    for row in fitted.itertuples():
        print(f"✓ n={row.n} {row.quantity} slope {row.slope:.4f} [{row.slope_lower:.4f}, {row.slope_upper:.4f}]")
    if options.plots:
        ReportVisualizations.plot_exponents(table, fitted, out / "exponents.svg")


def run_time_change(config: ExperimentConfig, out: Path, options: argparse.Namespace) -> None:
    """Time-change profiles per replica and their linearity summary"""
    frames, rows = [], []
    for n in _progress(config.n_grid, options.quiet, "time-change sizes"):
        tasks = [(config.model, n, config.k_grid[0], config.steps, config.t_grid or None)] * config.replicas
        for i, result in enumerate(run_replicas(_time_change_replica, tasks, config.seed, config.workers)):
            row = {"n": n, "replica": i, "status": result["status"], "slope": np.nan, "ratio_cv": np.nan,
                   "mid_gap_commute": np.nan, "mid_gap_averaged": np.nan}
            if result["frame"] is not None:
                row.update({key: result[key] for key in ("slope", "ratio_cv", "mid_gap_commute", "mid_gap_averaged")})
                frame = result["frame"]
                frame.insert(0, "replica", i)
                frame.insert(0, "n", n)
                frames.append(frame)
            rows.append(row)
    summary = pd.DataFrame(rows)
    profiles = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(
        columns=["n", "replica", "t", "m", "raw", "averaged", "commute"])
    ReportProcessor.write_table(profiles, out / "time_change.csv")
    ReportProcessor.write_table(summary, out / "time_change_replicas.csv")
    digest = ReportProcessor.summarize_time_change(summary)
    ReportProcessor.write_summary({**ReportProcessor.run_metadata(config), **digest}, out / "time_change.json")
    if digest["usable"] == 0:
        print("⚠ No replica produced a time-change profile")
        return
    print(f"✓ {digest['usable']} of {digest['replicas']} profiles; median slope {digest['slope_median']:.4f}, "
          f"median ratio CV {digest['ratio_cv_median']:.3f}")
    if options.plots:
        ReportVisualizations.plot_time_change(profiles, out / "time_change.svg")


def _tree_bm_oracles(n_paths: int, rng: np.random.Generator) -> pd.DataFrame:
    """Hitting probabilities and exit times on a segment and a 3-star against their closed forms"""
    rows = []

    segment = discretize(segment_tree(2.0), h=0.25)
    start = segment.site_on_edge(0, 1, 0.5)
    ends = (segment.vertex_site(0), segment.vertex_site(1))
    sample = simulate_until_hit(segment, start, ends, n_paths, rng)
    rows.append(("segment", "hit_probability", sample.probability(ends[0]), sample.standard_error(ends[0]),
                 hitting_probability(segment, start, ends[0], ends[1])))

    unit = discretize(segment_tree(1.0), h=0.1)
    sample = simulate_until_hit(unit, unit.root_site, [unit.vertex_site(1)], n_paths, rng)
    rows.append(("segment", "exit_time", sample.mean_time(), float(np.nanstd(sample.hit_times) / np.sqrt(n_paths)),
                 expected_exit_time(unit, unit.root_site, unit.vertex_site(1))))

    star = discretize(star_tree([1.0, 1.0, 2.0]), h=0.25)
    start, first, second = (star.vertex_site(v) for v in (1, 2, 3))
    sample = simulate_until_hit(star, start, [first, second], n_paths, rng)
    rows.append(("star", "hit_probability", sample.probability(first), sample.standard_error(first),
                 hitting_probability(star, start, first, second)))

    frame = pd.DataFrame(rows, columns=["case", "quantity", "estimate", "std_error", "exact"])
    frame["z"] = (frame["estimate"] - frame["exact"]) / frame["std_error"]
    return frame


def run_tree_bm(config: ExperimentConfig, out: Path, options: argparse.Namespace) -> None:
    """Closed-form oracles on small trees, then local-time bookkeeping on sampled skeletons per lattice step"""
    oracles = _tree_bm_oracles(config.n_paths, np.random.default_rng([config.seed, 1]))
    ReportProcessor.write_table(oracles, out / "tree_bm_oracles.csv")
    worst = float(oracles["z"].abs().max())
    print(f"{'✓' if worst < 4 else '⚠'} Oracle cases within {worst:.2f} standard errors")

    rows = []
    for n in _progress(config.n_grid, options.quiet, "tree-bm sizes"):
        tasks = [(config.model, n, config.k_grid[0], sorted(config.h_grid, reverse=True), config.t_max)]
        results = run_replicas(_tree_bm_replica, tasks * config.replicas, config.seed, config.workers)
        for i, replica_rows in enumerate(results):
            rows.extend({"replica": i, **row} for row in replica_rows)
    frame = pd.DataFrame(rows, columns=["replica", "n", "K", "h_fraction", "h", "t", "n_sites", "integral_error",
                                        "gap_median", "gap_max"])
    ReportProcessor.write_table(frame, out / "tree_bm.csv")
    digest = ReportProcessor.summarize_tree_bm(frame)
    ReportProcessor.write_summary({**ReportProcessor.run_metadata(config), **digest,
                                   "oracles": oracles.to_dict(orient="records")}, out / "tree_bm.json")
    if frame.empty:
        print("⚠ No tree-like skeleton to run Brownian motion on")
        return
    print(f"✓ {digest['replicas']} skeleton paths; max |integral L dnu - t| "
          f"{frame['integral_error'].max():.3g}")
    if options.plots:
        ReportVisualizations.plot_local_time_gaps(frame, out / "tree_bm.svg")


def small_graph_corpus(seed: int, random_graphs: int) -> List[Tuple[str, RootedGraph]]:
    """Named small graphs plus seeded random connected graphs"""
    corpus = [(f"path{n}", RootedGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)])) for n in (2, 3, 5, 8)]
    corpus += [(f"cycle{n}", RootedGraph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])) for n in (3, 4, 7)]
    corpus.append(("complete5", RootedGraph.from_edges(5, [(u, v) for u in range(5) for v in range(u + 1, 5)])))
    corpus.append(("star6", RootedGraph.from_edges(6, [(0, v) for v in range(1, 6)])))
    corpus.append(("ladder", RootedGraph.from_edges(8, [(i, i + 1) for i in range(3)] + [(i, i + 1) for i in range(4, 7)]
                                                      + [(i, i + 4) for i in range(4)])))
    rng = np.random.default_rng(seed)
    for i in range(random_graphs):
        n = int(rng.integers(4, 16))
        edges = {(int(rng.integers(v)), v) for v in range(1, n)}
        for u in range(n):
            for v in range(u + 2, n):
                if rng.random() < 0.15:
                    edges.add((u, v))
        corpus.append((f"random{i:03d}", RootedGraph.from_edges(n, sorted(edges))))
    return corpus


def _pairs(g: RootedGraph) -> List[Tuple[int, int]]:
    if g.n_vertices <= 6:
        return [(x, y) for x in range(g.n_vertices) for y in range(x + 1, g.n_vertices)]
    far = int(np.argmax(g.root_distances))
    return [(g.root, far), (g.root, 1), (1, g.n_vertices - 1)]


def _fourth_moment_rows(trials: int, rng: np.random.Generator) -> pd.DataFrame:
    law = IncrementLaw("rademacher")
    rules = [("fixed(10)", StoppingRule("fixed", n=10)), ("fixed(100)", StoppingRule("fixed", n=100)),
             ("geometric(0.05)", StoppingRule("geometric", p=0.05, cap=2000)),
             ("exit(5)", StoppingRule("exit", level=5.0, cap=2000))]
    rows = []
    for name, rule in rules:
        check = verify_fourth_moment_bound(law, rule, trials, rng)
        rows.append({"rule": name, "lhs": check.lhs_estimate, "lhs_stderr": check.lhs_stderr, "rhs": check.rhs,
                     "holds": check.holds, "wald_first": check.wald_first, "wald_second": check.wald_second,
                     "wald_second_expected": check.wald_second_expected})
    horizon = np.arange(1, 1001)
    exact = np.array([fixed_horizon_fourth_moment(law, int(n)) for n in horizon])
    bound = FOURTH_MOMENT_CONSTANT * (law.m2 ** 2 * horizon ** 2 + law.m4 * horizon)
    rows.append({"rule": "fixed(1..1000) exact", "lhs": float(np.max(exact / bound)), "lhs_stderr": 0.0, "rhs": 1.0,
                 "holds": bool(np.all(exact <= bound)), "wald_first": np.nan, "wald_second": np.nan,
                 "wald_second_expected": np.nan})
    return pd.DataFrame(rows)


def run_inequalities(config: ExperimentConfig, out: Path, options: argparse.Namespace) -> None:
    """Exact variance bounds and commute identities on the corpus, Monte Carlo fourth-moment bounds"""
    rows = []
    for name, g in _progress(small_graph_corpus(config.seed, config.replicas), options.quiet, "corpus"):
        for x, y in _pairs(g):
            base = {"graph": name, "n_vertices": g.n_vertices, "n_edges": g.n_edges, "x": x, "y": y}
            for check, result in (("variance_bound", verify_variance_bound(g, x, y)),
                                  ("variance_proposition", verify_variance_proposition(g, x, y))):
                rows.append({**base, "check": check, "lhs": result.lhs, "rhs": result.rhs, "holds": result.holds})
            commute, rhs = commute_time(g, x, y), 2.0 * g.n_edges * effective_resistance(g, x, y)
            rows.append({**base, "check": "commute_identity", "lhs": commute, "rhs": rhs,
                         "holds": bool(np.isclose(commute, rhs, rtol=1e-9, atol=0.0))})
    frame = pd.DataFrame(rows)
    moments = _fourth_moment_rows(config.n_paths, np.random.default_rng([config.seed, 2]))
    ReportProcessor.write_table(frame, out / "inequalities.csv")
    ReportProcessor.write_table(moments, out / "fourth_moment.csv")

    violations = ReportProcessor.count_violations(frame)
    violations["fourth_moment"] = int((~moments["holds"].astype(bool)).sum())
    ReportProcessor.write_summary({**ReportProcessor.run_metadata(config), "graphs": int(frame["graph"].nunique()),
                                   "checks": int(len(frame)), "violations": violations,
                                   "total_violations": sum(violations.values())}, out / "inequalities.json")
    total = sum(violations.values())
    if total:
        print(f"✗ {total} violations: {violations}")
    else:
        print(f"✓ {len(frame)} checks on {frame['graph'].nunique()} graphs, no violations")


PIPELINES: Dict[str, Callable[[ExperimentConfig, Path, argparse.Namespace], None]] = {
    "generate": run_generate,
    "skeleton": run_skeleton,
    "conditions": run_conditions,
    "exponents": run_exponents,
    "tree-bm": run_tree_bm,
    "time-change": run_time_change,
    "inequalities": run_inequalities,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment config (JSON)")
    common.add_argument("--seed", type=int, help="master seed, overrides the config")
    common.add_argument("--workers", type=int, help="parallel workers, overrides the config")
    common.add_argument("--out", help="output directory, overrides the config")
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--quiet", action="store_true", help="no progress bars")
    common.add_argument("--plots", action="store_true", help="also write SVG figures")

    parser = argparse.ArgumentParser(prog="skeleton-walks", description="Skeleton and random walk experiments")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{" + ",".join(SUBCOMMANDS) + "}")
    for name in SUBCOMMANDS:
        command = sub.add_parser(name, parents=[common], help=PIPELINES[name].__doc__)
        if name == "generate":
            command.add_argument("--family", help="model family, overrides the config")
            command.add_argument("--n", type=int, help="graph size, overrides the config")
            command.add_argument("--d", type=int, help="lattice dimension, overrides the config")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    logging.basicConfig(level=getattr(logging, args.log_level), format="%(levelname)s %(name)s: %(message)s")

    try:
        config = load_config(args.config, args.command).with_overrides(
            seed=args.seed, workers=args.workers, out=args.out,
            model_family=getattr(args, "family", None), model_n=getattr(args, "n", None),
            model_dimension=getattr(args, "d", None),
        )
    except ConfigError as exc:
        print(f"✗ Invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out = Path(config.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(config.to_json(include_execution=False))
        PIPELINES[config.subcommand](config, out, args)
    except (OSError, SkeletonWalksError, ValueError) as exc:
        logger.debug("Pipeline failed", exc_info=True)
        print(f"✗ {config.subcommand} failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    print(f"✓ Outputs in {out} (config {config.config_hash()[:12]})")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
