"""
Tests for the random graph generators and mark sampling
"""
from collections import Counter

import networkx as nx
import numpy as np
import pytest
from scipy import stats

from src.errors import ConfigError, StructuralError
from src.graph_core import RootedGraph, find_cut_decomposition
from src.models import (ModelSpec, OffspringLaw, add_shortcut_edges, gen_brw_trace, gen_gw_tree,
                        gen_path_control, sample_marks)
from tests.graph_factories import path_graph


def _shape_signature(g: RootedGraph) -> tuple:
    """Plane-tree shape as the depth-first sequence of child counts"""
    children = Counter(min(u, v) for u, v in g.edges())
    return tuple(children.get(v, 0) for v in range(g.n_vertices))


class TestOffspringLaws:
    @pytest.mark.parametrize("name", ["geometric", "poisson", "binary"])
    def test_critical(self, name):
        law = OffspringLaw(name)
        assert law.distribution.mean() == pytest.approx(1.0)

    def test_variances(self):
        assert OffspringLaw("geometric").variance == pytest.approx(2.0)
        assert OffspringLaw("poisson").variance == pytest.approx(1.0)
        assert OffspringLaw("binary").variance == pytest.approx(1.0)

    def test_unsupported(self):
        with pytest.raises(ValueError):
            OffspringLaw("zipf")

    @pytest.mark.parametrize("name", ["geometric", "poisson", "binary"])
    def test_sum_conditioning(self, name, rng):
        law = OffspringLaw(name)
        counts = law.sample_with_sum(rng, 11, 10)
        assert counts.sum() == 10 and len(counts) == 11 and counts.min() >= 0


class TestGaltonWatson:
    def test_single_vertex(self, rng):
        g = gen_gw_tree(1, OffspringLaw(), rng)
        assert g.n_vertices == 1 and g.n_edges == 0

    def test_two_vertices(self, rng):
        g = gen_gw_tree(2, OffspringLaw(), rng)
        assert g.edges() == [(0, 1)]

    @pytest.mark.parametrize("name", ["geometric", "poisson"])
    def test_exact_size(self, name, rng):
        for n in (3, 17, 500):
            g = gen_gw_tree(n, OffspringLaw(name), rng)
            assert g.n_vertices == n and g.is_tree and g.root == 0

    def test_binary_rejects_even_size(self, rng):
        with pytest.raises(ValueError):
            gen_gw_tree(10, OffspringLaw("binary"), rng)

    def test_cycle_lemma_matches_rejection(self):
        # Uniform plane trees with 5 vertices: 14 shapes, each with probability 1/14
        rng = np.random.default_rng(3)
        law = OffspringLaw("geometric")
        draws = 14_000
        cycle = Counter(_shape_signature(gen_gw_tree(5, law, rng)) for _ in range(draws))
        rejection = Counter(_shape_signature(gen_gw_tree(5, law, rng, method="rejection")) for _ in range(draws))
        assert len(cycle) == 14 and len(rejection) == 14
        shapes = sorted(cycle)
        table = np.array([[cycle[s] for s in shapes], [rejection[s] for s in shapes]])
        _, p_value, _, _ = stats.chi2_contingency(table)
        assert p_value > 0.001
        assert stats.chisquare([cycle[s] for s in shapes]).pvalue > 0.001

    @pytest.mark.slow
    def test_height_concentration(self):
        rng = np.random.default_rng(11)
        n = 10_000
        heights = [gen_gw_tree(n, OffspringLaw(), rng).root_distances.max() / np.sqrt(n) for _ in range(100)]
        assert np.std(heights) / np.mean(heights) < 0.5
        # CRT scaling: mean height of 2/sigma times the excursion maximum, sigma^2 = 2
        assert np.mean(heights) == pytest.approx(np.sqrt(2) * np.sqrt(np.pi / 2), rel=0.15)


class TestBranchingRandomWalk:
    def test_single_vertex(self, rng):
        g = gen_brw_trace(RootedGraph.from_edges(1, []), 3, rng)
        assert g.n_vertices == 1
        assert np.array_equal(g.locations[g.root], [0, 0, 0])

    def test_path_in_one_dimension_is_interval(self, rng):
        trace = gen_brw_trace(path_graph(60), 1, rng)
        coords = np.sort(trace.locations[:, 0])
        assert np.array_equal(coords, np.arange(coords[0], coords[-1] + 1))
        assert trace.n_edges == trace.n_vertices - 1

    def test_edges_are_lattice_edges(self, rng):
        tree = gen_gw_tree(300, OffspringLaw(), rng)
        trace = gen_brw_trace(tree, 3, rng)
        for u, v in trace.edges():
            assert trace.lattice_distance(u, v) == 1
        assert trace.n_edges <= tree.n_edges
        assert np.array_equal(trace.locations[trace.root], [0, 0, 0])

    def test_high_dimension_near_injective(self, rng):
        # Immediate backtracking alone merges about 1/(2d) of the vertices
        tree = gen_gw_tree(10_000, OffspringLaw(), rng)
        trace = gen_brw_trace(tree, 14, rng)
        assert 0 < 1 - trace.n_vertices / tree.n_vertices < 0.1


class TestModelSpec:
    def test_rejects_unknown_family(self):
        with pytest.raises(ConfigError):
            ModelSpec(family="percolation")

    def test_path_control(self):
        g = gen_path_control(7)
        assert g.root == 3 and g.locations[g.root, 0] == 0

    def test_shortcuts(self, rng):
        tree = gen_gw_tree(50, OffspringLaw(), rng)
        g = add_shortcut_edges(tree, 5, rng)
        assert g.n_edges == tree.n_edges + 5

    def test_generate_each_family(self, rng):
        for family in ("gw_tree", "brw_trace", "path"):
            g = ModelSpec(family=family, n=101, dimension=4).generate(rng)
            assert nx.is_connected(g.graph)


class TestMarks:
    def test_zero_count(self, path4, rng):
        assert sample_marks(path4, find_cut_decomposition(path4), 0, "uniform_cut_points", rng) == []

    def test_no_cut_points(self, triangle, rng):
        with pytest.raises(StructuralError):
            sample_marks(triangle, find_cut_decomposition(triangle), 3, "uniform_cut_points", rng)

    def test_uniform_over_cut_points(self, rng):
        g = path_graph(6)
        marks = sample_marks(g, find_cut_decomposition(g), 5000, "uniform_cut_points", rng)
        counts = Counter(marks)
        assert set(counts) == {0, 1, 2, 3, 4}
        assert stats.chisquare([counts[v] for v in range(5)]).pvalue > 0.01

    def test_projected_law_is_size_biased(self, rng):
        # Star-ish tree: 0 has children 1, 2; 1 has children 3, 4, 5; the root projects to itself
        g = RootedGraph.from_edges(6, [(0, 1), (0, 2), (1, 3), (1, 4), (1, 5)])
        marks = sample_marks(g, find_cut_decomposition(g), 10_000, "uniform_vertices_projected", rng)
        counts = Counter(marks)
        assert set(counts) == {0, 1}
        assert counts[1] / 10_000 == pytest.approx(1 / 2, abs=0.02)

    def test_projected_law_skips_root_bubble_without_root_cut_point(self, rng):
        # Triangle 0-1-2 holds the root; the tail 2-3-4 hangs from it
        g = RootedGraph.from_edges(5, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4)])
        marks = sample_marks(g, find_cut_decomposition(g), 10_000, "uniform_vertices_projected", rng)
        counts = Counter(marks)
        assert set(counts) == {2, 3}
        assert counts[2] / 10_000 == pytest.approx(1 / 2, abs=0.02)
