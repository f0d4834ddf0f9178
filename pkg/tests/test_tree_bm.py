"""
Tests for tree discretization, lattice Brownian motion, local times and crossing estimates
"""
import numpy as np
import pandas as pd
import pytest

from src.errors import StructuralError
from src.skeleton import SkeletonBuilder, reduce_tree
from src.tree_bm import (crossing_local_time_estimate, discretize, expected_exit_time, hitting_probability,
                         local_times, segment_tree, simulate, simulate_until_hit, star_tree, vertex_chain)
from tests.graph_factories import bubble_chain, path_graph


def _bubble_skeleton():
    return SkeletonBuilder(bubble_chain()).build([5, 6])


def _two_edge_path(r1: float = 1.0, r2: float = 1.0):
    """root - a - b with equal lengths and resistances"""
    parent = {"r": None, "a": "r", "b": "a"}
    weights = {"r": 0.0, "a": r1, "b": r2}
    return reduce_tree(parent, ["a", "b"], weights, dict(weights))


def _subdivided_segment(m: int):
    """Unit segment cut into m edges of resistance 1/m"""
    labels = [f"v{i}" for i in range(m + 1)]
    parent = {labels[0]: None, **{labels[i]: labels[i - 1] for i in range(1, m + 1)}}
    weights = {labels[0]: 0.0, **{labels[i]: 1.0 / m for i in range(1, m + 1)}}
    return reduce_tree(parent, labels[1:], weights, dict(weights))


class TestDiscretize:
    def test_unit_segment(self):
        net = discretize(segment_tree(1.0), h=0.25)
        assert net.n_sites == 5
        assert net.n_pieces == 4
        assert np.allclose(sorted(net.weights), [0.125, 0.125, 0.25, 0.25, 0.25])

    def test_y_tree(self):
        net = discretize(star_tree([1.0, 1.0, 2.0]), h=0.5)
        assert list(net.edge_pieces) == [2, 2, 4]
        assert net.n_pieces == 8
        assert net.n_sites == 9

    def test_default_step_gives_eight_pieces(self):
        net = discretize(star_tree([0.3, 1.0, 2.5]))
        assert net.edge_pieces.min() >= 8

    def test_piece_lengths_within_bounds(self, rng):
        for _ in range(20):
            net = discretize(star_tree(rng.uniform(0.5, 3.0, size=4)), h=0.4)
            assert np.all(net.piece_values <= 0.4 + 1e-12)
            assert np.all(net.piece_values >= 0.2 - 1e-12)

    def test_step_too_large(self):
        with pytest.raises(StructuralError):
            discretize(segment_tree(1.0), h=1.0)
        with pytest.raises(ValueError):
            discretize(segment_tree(1.0), h=0.0)

    def test_resistance_pieces_sum_to_edge(self):
        tree = _bubble_skeleton()
        net = discretize(tree, metric="resistance", h=0.1)
        for e, (u, v) in enumerate(net.edges):
            sites = net.edge_sites(e)
            pieces = [1.0 / net.conductances[a, b] for a, b in zip(sites[:-1], sites[1:])]
            assert sum(pieces) == pytest.approx(tree.edge_data(u, v)["resistance"], abs=1e-12)

    def test_vertex_sites_keep_ids(self):
        tree = _bubble_skeleton()
        net = discretize(tree)
        assert net.n_vertices == tree.n_vertices
        for v in tree.vertices():
            assert net.site_vertex(net.vertex_site(v)) == v
        assert net.site_vertex(net.n_vertices) is None

    def test_positions_interpolated(self):
        tree = _bubble_skeleton()
        net = discretize(tree, h=0.25)
        for s in range(net.n_vertices, net.n_sites):
            parent, child = net.edges[net.site_edge[s]]
            fraction = net.site_offset[s] / net.edge_values[net.site_edge[s]]
            expected = (1 - fraction) * tree.position(parent) + fraction * tree.position(child)
            assert np.allclose(net.positions[s], expected)

    def test_projected_measure(self):
        tree = _bubble_skeleton()
        net = discretize(tree, measure="projected")
        total = sum(tree.measure.values())
        for v, mass in tree.measure.items():
            assert net.weights[net.vertex_site(v)] == pytest.approx(mass / total)
        assert net.weights[net.n_vertices:].sum() == 0.0

    def test_bad_measures(self):
        with pytest.raises(ValueError):
            discretize(segment_tree(1.0), measure={7: 1.0})
        with pytest.raises(ValueError):
            discretize(segment_tree(1.0), measure="volume")
        with pytest.raises(ValueError):
            discretize(segment_tree(1.0), metric="resistance")

    def test_site_on_edge(self):
        net = discretize(segment_tree(2.0), h=0.5)
        site = net.site_on_edge(0, 1, 0.5)
        assert net.site_offset[site] == pytest.approx(0.5)
        assert net.site_on_edge(1, 0, 1.5) == site
        assert net.site_on_edge(0, 1, 0.0) == net.vertex_site(0)
        with pytest.raises(ValueError):
            net.site_on_edge(0, 1, 0.3)


class TestHittingProbability:
    def test_segment_formula(self):
        net = discretize(segment_tree(2.0), h=0.5)
        start = net.site_on_edge(0, 1, 0.5)
        assert hitting_probability(net, start, net.vertex_site(0), net.vertex_site(1)) == pytest.approx(0.75)

    def test_star_formula_on_vertices(self):
        tree = star_tree([1.0, 1.0, 2.0])
        assert hitting_probability(tree, 1, 2, 3) == pytest.approx(2.0 / 3.0)
        assert hitting_probability(tree, 1, 3, 2) == pytest.approx(1.0 / 3.0)

    def test_same_targets(self):
        with pytest.raises(ValueError):
            hitting_probability(star_tree([1.0, 1.0]), 0, 1, 1)

    def test_segment_simulation(self):
        rng = np.random.default_rng(41)
        net = discretize(segment_tree(2.0), h=0.5)
        start = net.site_on_edge(0, 1, 0.5)
        sample = simulate_until_hit(net, start, [0, 1], 100_000, rng)
        assert sample.n_unresolved == 0
        assert abs(sample.probability(0) - 0.75) < 4 * np.sqrt(0.75 * 0.25 / 100_000)

    def test_three_star_simulation(self):
        rng = np.random.default_rng(43)
        net = discretize(star_tree([1.0, 1.0, 2.0]), h=0.25)
        start, first, second = (net.vertex_site(v) for v in (1, 2, 3))
        sample = simulate_until_hit(net, start, [first, second], 40_000, rng)
        exact = hitting_probability(net, start, first, second)
        assert exact == pytest.approx(2.0 / 3.0)
        assert abs(sample.probability(first) - exact) < 4 * np.sqrt(exact * (1 - exact) / 40_000)

    def test_start_on_target(self, rng):
        net = discretize(segment_tree(1.0), h=0.25)
        sample = simulate_until_hit(net, 0, [0, 1], 10, rng)
        assert np.all(sample.hit_sites == 0)
        assert np.all(sample.hit_times == 0.0)

    def test_scaling_lengths(self):
        tree = star_tree([1.0, 1.5, 2.0])
        stretched = tree.scaled(length_factor=3.0)
        assert hitting_probability(stretched, 1, 2, 3) == pytest.approx(hitting_probability(tree, 1, 2, 3))
        net = discretize(tree, h=0.25, normalize=False)
        wide = discretize(stretched, h=0.75, normalize=False)
        assert expected_exit_time(wide, 1, 3) == pytest.approx(9.0 * expected_exit_time(net, 1, 3))


class TestExitTime:
    def test_unit_segment_exact(self):
        net = discretize(segment_tree(1.0), h=0.1)
        assert expected_exit_time(net, net.root_site, net.vertex_site(1)) == pytest.approx(1.0)

    def test_unit_segment_simulated(self):
        rng = np.random.default_rng(47)
        net = discretize(segment_tree(1.0), h=0.1)
        sample = simulate_until_hit(net, net.root_site, [net.vertex_site(1)], 40_000, rng)
        assert sample.mean_time() == pytest.approx(1.0, abs=0.02)

    def test_y_tree_occupation(self):
        rng = np.random.default_rng(53)
        net = discretize(star_tree([1.0, 1.0, 2.0]), h=0.25)
        leaf, hub = net.vertex_site(1), net.root_site
        # only the start arm contributes: 2 * int_0^1 x dx / total length 4
        exact = expected_exit_time(net, leaf, hub)
        assert exact == pytest.approx(0.25)
        sample = simulate_until_hit(net, leaf, [hub], 20_000, rng)
        spread = np.nanstd(sample.hit_times) / np.sqrt(sample.n_paths)
        assert abs(sample.mean_time() - exact) < 4 * spread

    def test_exit_from_target(self):
        net = discretize(segment_tree(1.0), h=0.25)
        assert expected_exit_time(net, 1, 1) == 0.0


class TestSimulate:
    def test_steps_are_lattice_moves(self, rng):
        net = discretize(star_tree([1.0, 1.0, 2.0]), h=0.25)
        path = simulate(net, 5.0, rng)
        for a, b in zip(path.sites[:-1], path.sites[1:]):
            assert net.conductances[a, b] > 0
        assert np.all(np.diff(path.times) > 0)
        assert path.t_end == 5.0

    def test_zero_horizon(self, rng):
        net = discretize(segment_tree(1.0), h=0.25)
        path = simulate(net, 0.0, rng)
        assert path.n_steps == 0
        field = local_times(path)
        assert not field.occupation.any()
        assert not field.crossings.any()

    def test_deterministic(self):
        net = discretize(star_tree([1.0, 2.0]), h=0.25)
        first = simulate(net, 3.0, np.random.default_rng(5))
        second = simulate(net, 3.0, np.random.default_rng(5))
        assert np.array_equal(first.sites, second.sites)

    def test_stop_sites(self, rng):
        net = discretize(segment_tree(1.0), h=0.25)
        target = net.vertex_site(1)
        path = simulate(net, 1e6, rng, stop_sites=[target])
        assert path.current == target
        assert path.t_end == path.times[-1]

    def test_site_at(self, rng):
        net = discretize(segment_tree(1.0), h=0.25)
        path = simulate(net, 2.0, rng)
        assert path.site_at(0.0) == net.root_site
        with pytest.raises(ValueError):
            path.site_at(3.0)

    def test_csv_export(self, rng, tmp_path):
        net = discretize(_bubble_skeleton(), h=0.25)
        path = simulate(net, 2.0, rng)
        path.to_csv(tmp_path / "path.csv")
        frame = pd.read_csv(tmp_path / "path.csv")
        assert list(frame.columns) == ["time", "site", "vertex", "edge", "offset", "coord_1", "coord_2"]
        assert len(frame) == len(path.sites)
        local_times(path).to_csv(tmp_path / "field.csv")
        field = pd.read_csv(tmp_path / "field.csv")
        assert {"site", "weight", "local_time"} <= set(field.columns)
        assert len(field) == net.n_sites


class TestLocalTimes:
    def test_integral_equals_time(self, rng):
        net = discretize(star_tree([1.0, 0.5, 2.0]), h=0.1)
        path = simulate(net, 7.5, rng)
        assert local_times(path).integral() == pytest.approx(7.5, rel=1e-12)
        assert local_times(path, t=3.2).integral() == pytest.approx(3.2, rel=1e-12)

    def test_integral_with_atoms(self, rng):
        tree = _bubble_skeleton()
        net = discretize(tree, measure="projected")
        path = simulate(net, 4.0, rng)
        assert local_times(path).integral() == pytest.approx(4.0, rel=1e-12)

    def test_crossing_parity(self, rng):
        for tree in (star_tree([1.0, 1.0, 2.0]), _bubble_skeleton(), _two_edge_path()):
            net = discretize(tree, h=0.25)
            for _ in range(10):
                start = int(rng.integers(net.n_sites))
                field = local_times(simulate(net, 6.0, rng, start=start))
                assert set(np.unique(field.crossings - 2 * field.crossings_forward)) <= {-1, 0}

    def test_vertex_visits_follow_crossings(self, rng):
        net = discretize(_two_edge_path(), h=0.25)
        field = local_times(simulate(net, 20.0, rng))
        assert field.vertex_visits.sum() == field.crossings.sum() + 1

    def test_time_out_of_range(self, rng):
        net = discretize(segment_tree(1.0), h=0.25)
        path = simulate(net, 1.0, rng)
        with pytest.raises(ValueError):
            local_times(path, t=2.0)

    def test_profile_matches_reflected_walk(self):
        rng = np.random.default_rng(59)
        a, t = 0.2, 10.0
        net = discretize(segment_tree(1.0), h=a)
        coordinate = np.where(net.site_edge >= 0, net.site_offset, np.arange(net.n_sites) == 1)
        slot = np.rint(coordinate / a).astype(int)

        # reflected simple random walk on {0, ..., 5} with a^2 per step
        size = 6
        transition = np.zeros((size, size))
        transition[0, 1] = transition[size - 1, size - 2] = 1.0
        for i in range(1, size - 1):
            transition[i, i - 1] = transition[i, i + 1] = 0.5
        weights = np.full(size, a)
        weights[[0, -1]] = a / 2
        law, expected = np.eye(size)[0], np.zeros(size)
        for _ in range(int(round(t / a ** 2))):
            expected += law * a ** 2
            law = law @ transition
        oracle = expected / weights

        runs = 1000
        empirical = np.zeros(size)
        for _ in range(runs):
            field = local_times(simulate(net, t, rng))
            np.add.at(empirical, slot, field.local_time)
        empirical /= runs
        assert np.max(np.abs(empirical - oracle) / oracle) < 0.05


class TestCrossingEstimate:
    def test_requires_resistance_metric(self, rng):
        net = discretize(segment_tree(1.0), h=0.25)
        with pytest.raises(ValueError):
            crossing_local_time_estimate(local_times(simulate(net, 1.0, rng)))

    def test_zero_time(self, rng):
        net = discretize(_two_edge_path(), metric="resistance", h=0.25, measure="resistance")
        estimate = crossing_local_time_estimate(local_times(simulate(net, 0.0, rng)))
        assert not estimate["estimate"].any()
        assert list(estimate["kind"]) == ["edge", "edge", "vertex"]

    def test_single_edge_long_run(self):
        rng = np.random.default_rng(61)
        net = discretize(segment_tree(1.0, resistance=1.0), metric="resistance", h=0.1, measure="resistance")
        estimate = crossing_local_time_estimate(local_times(simulate(net, 2000.0, rng)))
        row = estimate.iloc[0]
        assert row["gap"] < 0.1 * row["local_time"]

    def test_vertex_estimate(self):
        rng = np.random.default_rng(67)
        net = discretize(_two_edge_path(), metric="resistance", h=0.1, measure="resistance")
        estimate = crossing_local_time_estimate(local_times(simulate(net, 2000.0, rng)))
        vertex = estimate[estimate["kind"] == "vertex"].iloc[0]
        assert vertex["id"] == 1
        assert vertex["gap"] < 0.15 * vertex["local_time"]

    @pytest.mark.slow
    def test_gap_shrinks_with_edge_resistance(self):
        rng = np.random.default_rng(71)
        medians = []
        for m in (2, 16):
            net = discretize(_subdivided_segment(m), metric="resistance", h=0.25 / m, measure="resistance")
            gaps = [crossing_local_time_estimate(local_times(simulate(net, 5.0, rng)))["gap"].max()
                    for _ in range(30)]
            medians.append(np.median(gaps))
        assert medians[1] < medians[0]


class TestVertexChain:
    def test_bubble_chain_rows(self):
        chain = vertex_chain(_bubble_skeleton())
        assert list(chain.index) == [0, 2, 4, 5, 6]
        assert np.allclose(chain.sum(axis=1), 1.0)
        assert chain.loc[0, 2] == pytest.approx(0.5)
        assert chain.loc[2, 0] == pytest.approx(2 / 13)
        assert chain.loc[2, 4] == pytest.approx(5 / 13)
        assert chain.loc[2, 5] == pytest.approx(6 / 13)
        assert chain.loc[5, 2] == pytest.approx(1.0)
        assert chain.loc[6, 4] == pytest.approx(1.0)

    def test_path_is_simple_walk(self, path4):
        chain = vertex_chain(SkeletonBuilder(path4).build([2]))
        assert np.allclose(chain.to_numpy(), [[0, 1, 0], [0.5, 0, 0.5], [0, 1, 0]])

    def test_single_vertex(self):
        chain = vertex_chain(SkeletonBuilder(path_graph(3)).build([0]))
        assert chain.shape == (1, 1)
        assert chain.iloc[0, 0] == 0.0
