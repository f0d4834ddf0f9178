"""
Tests for excursions, excursion-coded trees and K-ISE samples
"""
import logging
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from src.continuum import (Excursion, MarkedRealTree, contour_excursion, contour_first_visits, embed_gaussian,
                           reduce_crt, sample_kise, sample_normalized_excursion, tree_distance)
from src.models import OffspringLaw, gen_gw_tree
from tests.graph_factories import path_graph


def _tent() -> Excursion:
    return Excursion.from_function(lambda t: 1.0 - np.abs(2.0 * t - 1.0), 4)


def _two_humps(valley: float = 0.0) -> Excursion:
    return Excursion(np.array([0.0, 1.0, valley, 1.0, 0.0]))


def _excursion_max_cdf(x: np.ndarray) -> np.ndarray:
    k = np.arange(1, 60)[:, None]
    x = np.atleast_1d(x)[None, :]
    return 1.0 + 2.0 * np.sum((1.0 - 4.0 * k ** 2 * x ** 2) * np.exp(-2.0 * k ** 2 * x ** 2), axis=0)


class TestExcursion:
    def test_two_steps(self, rng):
        exc = sample_normalized_excursion(2, rng)
        assert np.allclose(exc.samples, [0.0, 1.0 / np.sqrt(2.0), 0.0])

    def test_shape_constraints(self, rng):
        for _ in range(50):
            exc = sample_normalized_excursion(200, rng)
            assert exc.samples[0] == 0 and exc.samples[-1] == 0
            assert exc.samples.min() >= 0
            assert np.allclose(np.abs(np.diff(exc.samples)), 1.0 / np.sqrt(200))

    def test_rejects_odd_steps(self, rng):
        with pytest.raises(ValueError):
            sample_normalized_excursion(7, rng)

    def test_uniform_over_dyck_paths(self):
        rng = np.random.default_rng(17)
        counts = Counter(tuple(sample_normalized_excursion(6, rng).samples.round(6)) for _ in range(10_000))
        assert len(counts) == 5
        assert stats.chisquare(list(counts.values())).pvalue > 0.001

    def test_invalid_excursions(self):
        with pytest.raises(ValueError):
            Excursion(np.array([0.0, -1.0, 0.0]))
        with pytest.raises(ValueError):
            Excursion(np.array([0.0, 0.0, 0.0]))
        with pytest.raises(ValueError):
            Excursion(np.array([0.0, 1.0, 1.0]))

    @pytest.mark.slow
    def test_maximum_law(self):
        rng = np.random.default_rng(23)
        heights = [sample_normalized_excursion(20_000, rng).height for _ in range(2000)]
        assert stats.kstest(heights, _excursion_max_cdf).pvalue > 0.01


class TestTreeDistance:
    def test_tent_identifies_symmetric_times(self):
        assert tree_distance(_tent(), 0.25, 0.75) == pytest.approx(0.0)

    def test_tent_root_to_peak(self):
        assert tree_distance(_tent(), 0.0, 0.5) == pytest.approx(1.0)

    def test_off_grid_interpolation(self):
        # g(0.1) = 0.2, g(0.6) = 0.8, minimum over [0.1, 0.6] is 0.2
        assert tree_distance(_tent(), 0.1, 0.6) == pytest.approx(0.6)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            tree_distance(_tent(), -0.1, 0.5)

    def test_pseudo_metric(self, rng):
        exc = sample_normalized_excursion(1000, rng)
        s, t, u = (rng.integers(0, 1001, size=20_000) / 1000.0 for _ in range(3))
        d_st, d_tu, d_su = tree_distance(exc, s, t), tree_distance(exc, t, u), tree_distance(exc, s, u)
        assert np.allclose(d_st, tree_distance(exc, t, s))
        assert np.all(d_su <= d_st + d_tu + 1e-12)

    def test_four_point_condition(self, rng):
        exc = sample_normalized_excursion(2000, rng)
        marked = MarkedRealTree(exc, tuple(rng.uniform(size=8)))
        assert marked.four_point_violation() < 1e-9

    def test_branch_depth_two_ways(self, rng):
        exc = sample_normalized_excursion(500, rng)
        times = rng.integers(0, 501, size=6) / 500.0
        marked = MarkedRealTree(exc, tuple(times))
        assert np.allclose(marked.branch_depths, marked.gromov_depths(), atol=1e-12)
        grid = np.rint(times * 500).astype(int)
        for i in range(6):
            for j in range(6):
                lo, hi = sorted((grid[i], grid[j]))
                assert marked.branch_depths[i, j] == pytest.approx(exc.samples[lo:hi + 1].min())


class TestReduceCRT:
    def test_tent_marks_merge(self):
        reduced = reduce_crt(_tent(), [0.25, 0.75])
        assert reduced.n_vertices == 2
        assert reduced.lengths[1] == pytest.approx(0.5)

    def test_two_humps(self):
        reduced = reduce_crt(_two_humps(), [0.25, 0.75])
        assert reduced.n_vertices == 3
        assert reduced.children(0) == [1, 2]
        assert np.allclose(reduced.lengths[1:], [1.0, 1.0])

    def test_raised_valley_gives_branch_point(self):
        reduced = reduce_crt(_two_humps(0.5), [0.25, 0.75])
        assert reduced.kinds == ("root", "branch", "mark", "mark")
        assert np.allclose(reduced.lengths, [0.0, 0.5, 0.5, 0.5])

    def test_single_mark(self, rng):
        exc = sample_normalized_excursion(400, rng)
        reduced = reduce_crt(exc, [0.3])
        assert reduced.n_vertices == 2
        assert reduced.lengths[1] == pytest.approx(float(exc.value(0.3)))

    def test_all_marks_at_root(self):
        reduced = reduce_crt(_tent(), [0.0, 1.0])
        assert reduced.n_vertices == 1

    def test_vertex_bounds_and_total_length(self, rng):
        for _ in range(30):
            exc = sample_normalized_excursion(1000, rng)
            marks = np.sort(rng.uniform(size=5))
            reduced = reduce_crt(exc, marks)
            assert 6 <= reduced.n_vertices <= 11
            depths = exc.value(marks)
            tour = depths[0] + depths[-1] + tree_distance(exc, marks[:-1], marks[1:]).sum()
            assert reduced.total_length() == pytest.approx(0.5 * tour)
            for v in reduced.branch_points():
                assert len(reduced.children(v)) >= 2

    def test_mark_distances_preserved(self, rng):
        exc = sample_normalized_excursion(600, rng)
        marked = MarkedRealTree(exc, tuple(rng.uniform(size=4)))
        reduced = marked.reduce()
        for i, a in enumerate(reduced.mark_vertices):
            for j, b in enumerate(reduced.mark_vertices):
                assert reduced.distance(a, b) == pytest.approx(marked.distances[i, j], abs=1e-12)


class TestContour:
    def test_path(self):
        exc = contour_excursion(path_graph(3))
        assert np.allclose(exc.samples * 2.0, [0, 1, 2, 1, 0])
        assert np.allclose(contour_first_visits(path_graph(3)), [0.0, 0.25, 0.5])

    def test_distances_match_tree(self, rng):
        tree = gen_gw_tree(80, OffspringLaw(), rng)
        exc = contour_excursion(tree)
        visits = contour_first_visits(tree)
        scale = np.sqrt(2 * (tree.n_vertices - 1))
        for a, b in rng.integers(0, 80, size=(40, 2)):
            coded = tree_distance(exc, visits[a], visits[b]) * scale
            assert coded == pytest.approx(tree.distance(int(a), int(b)))

    def test_single_vertex(self):
        with pytest.raises(ValueError):
            contour_excursion(path_graph(1))


class TestGaussianEmbedding:
    def test_segment_variance(self):
        rng = np.random.default_rng(29)
        segment = reduce_crt(_tent(), [0.5])
        ends = np.array([embed_gaussian(segment, 1, rng, grid_per_unit=4).positions[1, 0]
                         for _ in range(20_000)])
        # Var of the sample variance for N(0, 1) is 2 / N
        assert abs(ends.var() - 1.0) < 4 * np.sqrt(2.0 / 20_000)

    def test_covariance_is_common_depth(self):
        rng = np.random.default_rng(31)
        tree = reduce_crt(_two_humps(0.5), [0.25, 0.75])
        draws = np.array([embed_gaussian(tree, 2, rng, grid_per_unit=1).mark_positions() for _ in range(20_000)])
        cov = np.mean(draws[:, 0, :] * draws[:, 1, :], axis=0)
        assert np.allclose(cov, 0.5, atol=0.05)
        cross = np.mean(draws[:, 0, 0] * draws[:, 1, 1])
        assert abs(cross) < 0.05

    def test_disjoint_increments_uncorrelated(self):
        rng = np.random.default_rng(37)
        tree = reduce_crt(_two_humps(0.5), [0.25, 0.75])
        trials = 20_000
        samples = [embed_gaussian(tree, 1, rng, grid_per_unit=1) for _ in range(trials)]
        left = np.array([s.positions[2, 0] - s.positions[1, 0] for s in samples])
        right = np.array([s.positions[3, 0] - s.positions[1, 0] for s in samples])
        assert abs(np.corrcoef(left, right)[0, 1]) < 4 / np.sqrt(trials)

    def test_zero_length_tree(self, rng):
        sample = embed_gaussian(reduce_crt(_tent(), [0.0]), 3, rng)
        assert np.array_equal(sample.positions, np.zeros((1, 3)))

    def test_root_at_origin_and_paths_continuous(self, rng):
        sample = sample_kise(4, 400, 8, rng)
        assert np.array_equal(sample.positions[0], np.zeros(8))
        for v, path in sample.edge_paths.items():
            assert np.array_equal(path[0], sample.positions[sample.tree.parent[v]])
            assert np.array_equal(path[-1], sample.positions[v])


class TestKISE:
    def test_two_marks_vertex_count(self, rng):
        for _ in range(20):
            assert sample_kise(2, 200, 8, rng).tree.n_vertices in (3, 4)

    def test_single_mark_is_segment(self, rng):
        sample = sample_kise(1, 200, 8, rng)
        assert sample.tree.n_edges == 1
        assert sample.tree.lengths[1] == pytest.approx(float(sample.excursion.value(sample.marks[0])))

    def test_deterministic(self):
        first = sample_kise(3, 300, 8, np.random.default_rng(99))
        second = sample_kise(3, 300, 8, np.random.default_rng(99))
        assert np.array_equal(first.positions, second.positions)
        assert first.to_json() == second.to_json()

    def test_low_dimension_warns(self, rng, caplog):
        with caplog.at_level(logging.WARNING):
            sample_kise(2, 100, 3, rng)
        assert "d=3" in caplog.text
