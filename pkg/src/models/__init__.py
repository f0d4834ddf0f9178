"""
Random augmented graph models
"""
from .generators import (FAMILIES, MARK_LAWS, ModelSpec, OffspringLaw, add_shortcut_edges, gen_brw_trace,
                         gen_gw_tree, gen_path_control, sample_marks)
