"""
Skeleton construction: G(K), star-triangle expansion, projected measure and reduced trees
"""
from .selected_graph import SelectedSkeletonGraph, build_selected_skeleton, is_asymptotically_tree_like
from .skeleton_tree import (SkeletonTree, expand_star_triangle, project_measure, sausage_diameters,
                            sausage_labels)
from .reduced_tree import ReducedSpatialTree, reduce_skeleton, reduce_tree
from .builder import SkeletonBuilder
