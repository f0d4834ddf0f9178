"""
Exception hierarchy shared by the library and the runner
"""


class SkeletonWalksError(Exception):
    """Base class for all library errors"""


class StructuralError(SkeletonWalksError, ValueError):
    """Input graph or tree violates a structural precondition"""


class SolverError(SkeletonWalksError, RuntimeError):
    """A linear solve failed or returned non-finite values"""


class ConfigError(SkeletonWalksError, ValueError):
    """Experiment configuration is malformed"""


class InsufficientDataError(SkeletonWalksError, ValueError):
    """Not enough usable points for a fit"""
