"""
Finite rooted graphs, cut structure, electrical quantities and inequality checks
"""
from .rooted_graph import (RootedGraph, CutDecomposition, find_cut_decomposition,
                           read_edge_list, write_edge_list)
from .electrical import (ElectricalNetwork, HittingMoments, TriangleConductances, commute_time,
                         effective_resistance, hitting_time_moments, star_triangle_arms,
                         triangle_arm_conductances)
from .inequalities import (FOURTH_MOMENT_CONSTANT, FourthMomentCheck, IncrementLaw, StoppingRule,
                           VarianceCheck, fixed_horizon_fourth_moment, verify_fourth_moment_bound,
                           verify_variance_bound, verify_variance_proposition)
