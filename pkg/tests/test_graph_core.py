"""
Tests for rooted graphs, cut structure, electrical quantities and inequality checks
"""
import networkx as nx
import numpy as np
import pytest

from src.errors import StructuralError
from src.graph_core import (IncrementLaw, RootedGraph, StoppingRule, commute_time, effective_resistance,
                            find_cut_decomposition, fixed_horizon_fourth_moment, hitting_time_moments,
                            read_edge_list, star_triangle_arms, triangle_arm_conductances,
                            verify_fourth_moment_bound, verify_variance_bound, verify_variance_proposition,
                            write_edge_list)
from tests.graph_factories import cycle_graph, path_graph, random_connected_graph, random_tree


class TestRootedGraph:
    def test_rejects_disconnected(self):
        with pytest.raises(StructuralError):
            RootedGraph.from_edges(4, [(0, 1), (2, 3)])

    def test_rejects_self_loop_and_parallel_edges(self):
        with pytest.raises(StructuralError):
            RootedGraph.from_edges(2, [(0, 1), (1, 1)])
        with pytest.raises(StructuralError):
            RootedGraph.from_edges(2, [(0, 1), (1, 0)])

    def test_rejects_bad_root(self):
        with pytest.raises(StructuralError):
            RootedGraph.from_edges(2, [(0, 1)], root=5)

    def test_single_vertex(self):
        g = RootedGraph.from_edges(1, [], root=0)
        assert g.n_vertices == 1 and g.n_edges == 0
        assert g.diameter() == 0

    def test_edge_list_file_format(self, tmp_path, bubbles):
        path = tmp_path / "graph.txt"
        write_edge_list(bubbles, path)
        text = path.read_text().splitlines()
        assert text[0] == "d 2 root 0"
        assert "loc 3 2 -1" in text

        loaded = read_edge_list(path)
        assert loaded.edges() == bubbles.edges()
        assert loaded.root == bubbles.root
        assert np.array_equal(loaded.locations, bubbles.locations)

    def test_edge_list_without_locations(self, tmp_path, path3):
        path = tmp_path / "path.txt"
        write_edge_list(path3, path)
        loaded = read_edge_list(path)
        assert loaded.locations is None
        assert loaded.n_vertices == 3

    def test_diameter(self, square):
        assert square.diameter() == 2
        assert path_graph(7).diameter() == 6


class TestCutDecomposition:
    def test_path(self, path3):
        cuts = find_cut_decomposition(path3)
        assert cuts.cut_bonds == {(0, 1): 0, (1, 2): 1}
        assert cuts.cut_points == frozenset({0, 1})
        assert len(cuts.bubbles) == 3

    def test_triangle(self, triangle):
        cuts = find_cut_decomposition(triangle)
        assert cuts.cut_bonds == {}
        assert len(cuts.bubbles) == 1

    def test_bond_chain(self, bubbles):
        cuts = find_cut_decomposition(bubbles)
        assert cuts.separating_cut_points(7) == [5, 2, 0]
        assert cuts.bond_chain(3) == [(0, 1)]
        assert cuts.bond_chain(0) == []

    def test_cut_point_is_root_side(self, bubbles):
        cuts = find_cut_decomposition(bubbles)
        depth = bubbles.root_distances
        for (u, v), cut in cuts.cut_bonds.items():
            other = v if cut == u else u
            assert depth[cut] < depth[other]

    @pytest.mark.parametrize("seed", range(25))
    def test_bridges_match_edge_removal(self, seed):
        rng = np.random.default_rng(seed)
        g = random_connected_graph(int(rng.integers(2, 40)), 0.04, rng)
        cuts = find_cut_decomposition(g)
        for u, v in g.edges():
            pruned = nx.Graph(g.graph)
            pruned.remove_edge(u, v)
            assert cuts.is_cut_bond(u, v) == (not nx.is_connected(pruned))


class TestEffectiveResistance:
    def test_series_path(self):
        assert effective_resistance(path_graph(6), 0, 5) == pytest.approx(5.0)

    def test_square_opposite_corners(self, square):
        assert effective_resistance(square, 0, 2) == pytest.approx(1.0, rel=1e-10)

    def test_triangle_adjacent(self, triangle):
        assert effective_resistance(triangle, 0, 1) == pytest.approx(2.0 / 3.0, rel=1e-10)

    def test_same_vertex_is_zero(self, square):
        assert effective_resistance(square, 2, 2) == 0.0

    def test_metric_and_distance_bound(self, rng):
        g = random_connected_graph(25, 0.08, rng)
        r = np.array([[effective_resistance(g, a, b) for b in range(25)] for a in range(25)])
        assert np.allclose(r, r.T, atol=1e-9)
        for a, b, c in rng.integers(0, 25, size=(200, 3)):
            assert r[a, c] <= r[a, b] + r[b, c] + 1e-9
        for a, b in rng.integers(0, 25, size=(50, 2)):
            assert r[a, b] <= g.distance(int(a), int(b)) + 1e-9

    def test_tree_resistance_equals_distance(self, rng):
        g = random_tree(30, rng)
        network = g.network
        for a, b in rng.integers(0, 30, size=(20, 2)):
            assert network.effective_resistance(int(a), int(b)) == pytest.approx(g.distance(int(a), int(b)))

    def test_rayleigh_monotonicity(self, rng):
        g = random_connected_graph(20, 0.05, rng)
        before = effective_resistance(g, 0, 19)
        missing = [(u, v) for u in range(20) for v in range(u + 1, 20) if not g.graph.has_edge(u, v)]
        for u, v in missing[:10]:
            after = effective_resistance(g.with_extra_edges([(u, v)]), 0, 19)
            assert after <= before + 1e-12

    def test_resistances_from_matches_pairwise(self, square):
        row = square.network.resistances_from(0)
        assert row == pytest.approx([0.0, 0.75, 1.0, 0.75])


class TestTriangleConductances:
    def test_three_disjoint_paths(self):
        # x=0, y=1, z=2 joined by paths of lengths 1 (x-y), 2 (y-z), 3 (z-x)
        edges = [(0, 1), (1, 3), (3, 2), (2, 4), (4, 5), (5, 0)]
        g = RootedGraph.from_edges(6, edges, root=0)
        c = triangle_arm_conductances(g, 0, 1, 2)
        assert c.xy == pytest.approx(1.0)
        assert c.yz == pytest.approx(0.5)
        assert c.zx == pytest.approx(1.0 / 3.0)

    def test_symmetric_star(self):
        g = RootedGraph.from_edges(4, [(0, 3), (1, 3), (2, 3)], root=0)
        c = triangle_arm_conductances(g, 0, 1, 2)
        assert c.xy == pytest.approx(c.yz) == pytest.approx(c.zx)

    def test_rejects_repeated_corner(self, square):
        with pytest.raises(ValueError):
            triangle_arm_conductances(square, 0, 0, 2)

    def test_star_arms_formula(self):
        assert star_triangle_arms(1.0, 2.0, 3.0) == pytest.approx((0.5, 1.0 / 3.0, 1.0))

    def test_star_reproduces_pairwise_resistance(self, rng):
        g = random_connected_graph(15, 0.15, rng)
        c = triangle_arm_conductances(g, 0, 7, 14)
        r_x, r_y, r_z = c.star_arms()
        assert r_x + r_y == pytest.approx(effective_resistance(g, 0, 7), rel=1e-8)
        assert r_y + r_z == pytest.approx(effective_resistance(g, 7, 14), rel=1e-8)
        assert r_z + r_x == pytest.approx(effective_resistance(g, 14, 0), rel=1e-8)

    def test_escape_probability_monte_carlo(self):
        rng = np.random.default_rng(5)
        g = cycle_graph(5).with_extra_edges([(0, 2)])
        c = triangle_arm_conductances(g, 0, 2, 3)
        trials, hits = 20_000, 0
        for _ in range(trials):
            v = 0
            while True:
                nbrs = g.neighbors(v)
                v = int(nbrs[rng.integers(len(nbrs))])
                if v in (0, 2, 3):
                    hits += v == 2
                    break
        p = c.xy / g.degrees[0]
        sigma = np.sqrt(p * (1 - p) / trials)
        assert abs(hits / trials - p) < 4 * sigma


class TestHittingMoments:
    def test_path_of_two_edges(self, path3):
        m = hitting_time_moments(path3, 0, 2)
        assert m[1] == pytest.approx(4.0)
        assert m[2] == pytest.approx(24.0)

    def test_single_edge(self):
        g = path_graph(2)
        m = hitting_time_moments(g, 0, 1)
        assert m.moments == pytest.approx((1.0, 1.0, 1.0, 1.0))

    def test_rejects_same_vertex(self, path3):
        with pytest.raises(ValueError):
            hitting_time_moments(path3, 1, 1)

    @pytest.mark.parametrize("seed", range(20))
    def test_commute_time_identity(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 60))
        g = random_connected_graph(n, 0.1, rng)
        x, y = rng.choice(n, size=2, replace=False)
        expected = 2 * g.n_edges * effective_resistance(g, int(x), int(y))
        assert commute_time(g, int(x), int(y)) == pytest.approx(expected, rel=1e-9)

    def test_moment_ordering(self, rng):
        g = random_connected_graph(20, 0.1, rng)
        m = hitting_time_moments(g, 3, 11)
        assert m[1] ** 2 <= m[2]
        assert m[2] ** 2 <= m[4] * (1 + 1e-12)
        assert all(np.isfinite(m.moments))


class TestVarianceBounds:
    def test_path_spot_value(self, path3):
        check = verify_variance_bound(path3, 0, 2)
        assert check.lhs == pytest.approx(48.0)
        assert check.rhs == pytest.approx(256.0)
        assert check.holds

    def test_single_edge(self):
        check = verify_variance_bound(path_graph(2), 0, 1)
        assert (check.lhs, check.rhs, check.holds) == (pytest.approx(2.0), pytest.approx(16.0), True)

    def test_proposition_single_edge(self):
        check = verify_variance_proposition(path_graph(2), 0, 1)
        assert check.lhs == pytest.approx(0.5)
        assert check.rhs == pytest.approx(2.0)

    @pytest.mark.parametrize("seed", range(30))
    def test_random_graphs(self, seed):
        rng = np.random.default_rng(1000 + seed)
        n = int(rng.integers(2, 40))
        g = random_connected_graph(n, 0.1, rng)
        x, y = (int(v) for v in rng.choice(n, size=2, replace=False))
        assert verify_variance_bound(g, x, y).holds
        assert verify_variance_proposition(g, x, y).holds


class TestFourthMomentBound:
    def test_exact_fixed_horizon(self):
        law = IncrementLaw("rademacher")
        for n in (1, 10, 50, 1000):
            exact = fixed_horizon_fourth_moment(law, n)
            assert exact == 3 * n ** 2 - 2 * n
            assert exact <= 148 * (n ** 2 + n)

    def test_fixed_rademacher(self, rng):
        check = verify_fourth_moment_bound(IncrementLaw("rademacher"), StoppingRule("fixed", n=50), 50_000, rng)
        assert check.exact_fixed == 7400
        assert check.rhs == pytest.approx(148 * (2500 + 50))
        assert abs(check.lhs_estimate - 7400) < 5 * check.lhs_stderr
        assert check.holds and check.C_used == 148

    def test_zero_increments(self, rng):
        check = verify_fourth_moment_bound(IncrementLaw("zero"), StoppingRule("fixed", n=5), 100, rng)
        assert check.lhs_estimate == 0.0
        assert check.holds

    def test_geometric_stopping(self, rng):
        rule = StoppingRule("geometric", p=0.5, cap=100)
        check = verify_fourth_moment_bound(IncrementLaw("rademacher"), rule, 100_000, rng)
        assert check.holds
        assert check.wald_second == pytest.approx(check.wald_second_expected, rel=0.05)
        assert abs(check.wald_first) < 0.05

    def test_exit_stopping(self, rng):
        rule = StoppingRule("exit", level=5, cap=200)
        check = verify_fourth_moment_bound(IncrementLaw("gaussian"), rule, 20_000, rng)
        assert check.holds

    def test_rejects_heavy_tails(self):
        with pytest.raises(ValueError):
            IncrementLaw("cauchy")
