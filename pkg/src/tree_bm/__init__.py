"""
Brownian motion on metric trees by lattice discretization
"""
from .metric_net import (DEFAULT_PIECES_PER_EDGE, LENGTH, RESISTANCE, MetricTreeNet, SourceEdges, discretize,
                         segment_tree, source_edges, star_tree)
from .diffusion import (HittingSample, LocalTimeField, TreeDiffusionPath, crossing_local_time_estimate,
                        expected_exit_time, hitting_probability, local_times, simulate, simulate_until_hit,
                        vertex_chain)
