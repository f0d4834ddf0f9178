"""
Random walks on rooted graphs, their trace on the skeleton and their time change
"""
from .srw import (TraceRecord, WalkTrace, empirical_transitions, graph_trace_chain, srw,
                  trace_on_skeleton)
from .time_change import TimeChangeProfile, edge_sausage_sizes, expected_sojourn_times, time_change_profiles
from .exponents import ExponentStats, default_m_grid, exponent_stats, log_log_slope
