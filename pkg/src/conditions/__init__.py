"""
Statistical checks of the skeleton conditions, the reduced-tree distance and delta-density
"""
from .report import CONDITIONS, ConditionReport, kendall_trend
from .distance import same_shape, tree_distance_D, tree_distance_parts
from .checks import check_G, check_R, check_S, check_V, volume_discrepancy
from .density import check_delta_dense, check_dense_trend, project_marks
