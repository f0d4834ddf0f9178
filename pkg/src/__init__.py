"""
Skeleton Walks
Skeletons of critical random graphs, random walks on them and Brownian motion on trees.
"""

__version__ = "0.1.0"
