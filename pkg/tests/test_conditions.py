"""
Tests for the reduced-tree distance, condition sweeps and delta-density
"""
import json
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from src.conditions import (ConditionReport, check_delta_dense, check_dense_trend, check_G, check_R, check_S,
                            check_V, kendall_trend, project_marks, tree_distance_D, tree_distance_parts,
                            volume_discrepancy)
from src.errors import SolverError
from src.models import ModelSpec
from src.skeleton import SkeletonBuilder, reduce_tree
from tests.graph_factories import path_graph


def _star(lengths, positions=None):
    parent = {"r": None, "a": "r", "b": "r", "c": "r"}
    weights = {"r": 0.0, "a": lengths[0], "b": lengths[1], "c": lengths[2]}
    return reduce_tree(parent, ["a", "b", "c"], weights, positions=positions)


def _star_positions():
    return {"r": np.zeros(2), "a": np.array([1.0, 0.0]), "b": np.array([0.0, 1.0]), "c": np.array([-1.0, 0.0])}


class TestTreeDistance:
    def test_identical(self):
        tree = _star([1.0, 2.0, 3.0], _star_positions())
        assert tree_distance_D(tree, tree) == 0.0

    def test_edge_lengths(self):
        a = _star([1.0, 2.0, 3.0], _star_positions())
        b = _star([1.5, 2.0, 2.5], _star_positions())
        assert tree_distance_parts(a, b) == pytest.approx({"d1": 0.5, "d2": 0.0})
        assert tree_distance_D(a, b) == pytest.approx(0.5)

    def test_embedding_gap(self):
        moved = _star_positions()
        moved["b"] = np.array([0.0, 1.25])
        a = _star([1.0, 2.0, 3.0], _star_positions())
        b = _star([1.0, 2.0, 3.1], moved)
        assert tree_distance_D(a, b) == pytest.approx(0.35)

    def test_different_shapes(self):
        path = reduce_tree({"r": None, "a": "r", "b": "a"}, ["a", "b"], {"r": 0.0, "a": 1.0, "b": 1.0})
        cherry = reduce_tree({"r": None, "a": "r", "b": "r"}, ["a", "b"], {"r": 0.0, "a": 1.0, "b": 1.0})
        assert tree_distance_D(path, cherry) == 1.0

    def test_capped(self):
        assert tree_distance_D(_star([1.0, 2.0, 3.0]), _star([1.0, 2.0, 9.0])) == 1.0

    def test_metric_on_same_shape(self, rng):
        trees = [_star(1.0 + 0.1 * rng.random(3)) for _ in range(6)]
        for a in trees:
            for b in trees:
                assert tree_distance_D(a, b) == pytest.approx(tree_distance_D(b, a))
                for c in trees:
                    assert tree_distance_D(a, c) <= tree_distance_D(a, b) + tree_distance_D(b, c) + 1e-12

    def test_missing_positions(self):
        parent, weights = {"r": None, "a": "r", "b": "a"}, {"r": 0.0, "a": 1.0, "b": 1.0}
        placed = reduce_tree(parent, ["a", "b"], weights, positions={v: np.zeros(2) for v in parent})
        with pytest.raises(ValueError):
            tree_distance_D(placed, reduce_tree(parent, ["a", "b"], weights))


class TestConditionReport:
    def test_save(self, tmp_path):
        report = ConditionReport(condition="R", table=pd.DataFrame({"n": [10], "rho_median": [np.nan]}),
                                 constants={"rho": 1.0}, verdict="consistent")
        paths = report.save(tmp_path)
        doc = json.loads(paths["json"].read_text())
        assert doc["condition"] == "R"
        assert doc["cells"][0]["rho_median"] is None
        assert list(pd.read_csv(paths["csv"]).columns) == ["condition", "n", "rho_median"]

    def test_unknown_condition(self):
        with pytest.raises(ValueError):
            ConditionReport(condition="X", table=pd.DataFrame())

    def test_kendall_trend(self):
        assert kendall_trend([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
        assert np.isnan(kendall_trend([1, 2, 3], [0, 0, 0]))


class TestConditionR:
    def test_trees_have_unit_ratio(self):
        report = check_R(ModelSpec(family="gw_tree"), [200, 400], replicas=5, seed=3)
        assert np.allclose(report.table["ratio_min"], 1.0)
        assert np.allclose(report.table["ratio_max"], 1.0)
        assert report.constants["rho"] == pytest.approx(1.0)
        assert report.verdict == "consistent"

    def test_shortcuts_lower_the_ratio(self):
        report = check_R(ModelSpec(family="gw_tree", extra_edges=30), [300], replicas=10, seed=4)
        assert report.table["ratio_max"].max() <= 1.0 + 1e-9
        assert report.table["ratio_min"].min() < 1.0
        assert report.table["ratio_min"].min() > 0.0

    def test_worker_count_does_not_change_results(self):
        model = ModelSpec(family="gw_tree", extra_edges=10)
        serial = check_R(model, [150], replicas=4, seed=9, workers=1)
        parallel = check_R(model, [150], replicas=4, seed=9, workers=2)
        assert serial.to_json() == parallel.to_json()

    def test_rejects_empty_grid(self):
        with pytest.raises(ValueError):
            check_R(ModelSpec(), [], replicas=2)


class TestConditionS:
    def test_trees_are_always_tree_like(self):
        report = check_S(ModelSpec(family="gw_tree"), [200, 400], [2, 5], replicas=3, seed=5)
        assert len(report.table) == 4
        assert (report.table["p_not_tree_like"] == 0).all()
        assert report.table["p_zd_exceeds"].isna().all()
        assert (report.table["delta_intrinsic_median"] > 0).all()

    def test_brw_trace_has_spatial_diameters(self):
        report = check_S(ModelSpec(family="brw_trace", dimension=14), [300], [3], replicas=3, seed=6)
        assert report.table["delta_zd_median"].notna().all()

    @pytest.mark.slow
    def test_high_dimensional_brw_sweep(self):
        report = check_S(ModelSpec(family="brw_trace", n=2000, dimension=14), [2000], [5], replicas=20, seed=3)
        assert report.metadata["solver_failures"] == 0
        assert report.table["replicas"].tolist() == [20]
        assert report.table["p_not_tree_like"].notna().all()

    def test_solver_failure_drops_replica(self, monkeypatch):
        def failing_build(self, marks):
            raise SolverError("singular system")

        monkeypatch.setattr(SkeletonBuilder, "build", failing_build)
        report = check_S(ModelSpec(family="gw_tree"), [100], [2], replicas=3, seed=1)
        assert report.metadata["solver_failures"] == 3
        assert report.metadata["dropped"] == 0
        assert report.table["replicas"].tolist() == [0]
        assert any("failed linear solve" in note for note in report.notes)

    def test_rejects_bad_eps(self):
        with pytest.raises(ValueError):
            check_S(ModelSpec(), [100], [2], replicas=1, eps=0.0)


class TestConditionV:
    def test_proportional_measure(self):
        tree = SkeletonBuilder(path_graph(5)).build([3])
        synthetic = replace(tree, measure={0: 0, 1: 2, 2: 2, 3: 2})
        sup, nu = volume_discrepancy(synthetic, 5)
        assert sup == pytest.approx(0.0, abs=1e-12)
        assert nu == pytest.approx(1.2)

    def test_gw_mass_near_enumeration(self):
        report = check_V(ModelSpec(family="gw_tree"), [300, 600], [4], replicas=4, seed=8)
        for _, row in report.table.iterrows():
            assert row["nu_mean"] <= row["nu_enumerated"]
            assert row["nu_mean"] > 0.95 * row["nu_enumerated"]
        assert report.constants["nu"] > 0


class TestConditionG:
    def test_path_control_is_rejected(self):
        report = check_G(ModelSpec(family="path"), [2000], k=2, replicas=60, seed=10, excursion_steps=400)
        assert report.verdict == "rejected"
        assert report.tests["min_corrected_p"] <= 0.01

    def test_report_columns(self):
        report = check_G(ModelSpec(family="gw_tree"), [500], k=1, replicas=10, seed=12, excursion_steps=200)
        assert {"p_depth_ratio", "p_branch_fraction", "sigma_d_hat", "sigma_phi_hat"} <= set(report.table.columns)
        assert report.table["sigma_d_hat"].iloc[0] > 0
        assert np.isnan(report.table["p_shape"].iloc[0])

    @pytest.mark.slow
    def test_gw_skeleton_matches_crt(self):
        report = check_G(ModelSpec(family="gw_tree"), [20_000], k=2, replicas=150, seed=13)
        assert report.verdict == "consistent"


class TestDeltaDense:
    def _path_tree(self, marks):
        return SkeletonBuilder(path_graph(8)).build(marks)

    def test_all_cut_points(self):
        marks = list(range(7))
        assert check_delta_dense(self._path_tree(marks), [5], marks, delta=1.0)

    def test_coarse_marks_only(self):
        assert not check_delta_dense(self._path_tree([5]), [5], [5], delta=10.0)

    def test_neighbour_gap(self):
        tree = self._path_tree([1, 3, 5])
        assert not check_delta_dense(tree, [5], [1, 3, 5], delta=1.0)
        assert check_delta_dense(tree, [5], [1, 3, 5], delta=2.0)

    def test_projection(self):
        tree = self._path_tree([2, 6])
        assert project_marks(tree, [2], [2, 6]) == {2: 2, 6: 2}

    def test_rejects_non_nested_marks(self):
        with pytest.raises(ValueError):
            check_delta_dense(self._path_tree([1, 3]), [3], [1], delta=1.0)

    def test_trend_report(self):
        report = check_dense_trend(ModelSpec(family="gw_tree"), 400, 1, [2, 8, 32], delta=0.5, replicas=4, seed=14)
        assert report.condition == "dense"
        assert list(report.table["K_prime"]) == [2, 8, 32]
        assert report.table["p_dense"].between(0, 1).all()

    def test_trend_rejects_small_kprime(self):
        with pytest.raises(ValueError):
            check_dense_trend(ModelSpec(), 100, 4, [2, 8], delta=0.5, replicas=2)
