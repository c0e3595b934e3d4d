"""Exception types shared across the package.

Each class corresponds to one failure mode of the pipeline; the CLI maps
them onto process exit codes (see cli.EXIT_*).
"""


class RwtailError(Exception):
    """Base class for all package-specific failures."""


class KernelError(RwtailError, ValueError):
    """A jump kernel or model definition is invalid."""


class NormalizationError(KernelError):
    """Probabilities do not sum to one within the accepted tolerance."""


class SupportViolationError(KernelError):
    """A jump atom breaks the skip-free support constraint of its region."""


class NoRootError(RwtailError):
    """A convex section of a level-1 curve has no real root.

    Signals that the fixed coordinate lies outside the shadow of the level
    set; callers react by shrinking their search interval.
    """


class GeometryError(RwtailError):
    """Internal inconsistency between computed level-set features."""


class NullDriftError(RwtailError):
    """The interior mean drift vanishes; light-tail analysis is unsupported."""


class ConvergenceError(RwtailError):
    """An iterative solver hit its iteration cap before converging."""


class SimultaneousArrivalsError(RwtailError):
    """The batch distribution has a joint atom; the product-form bound needs
    single-node batches."""


class NoisyWindowError(RwtailError):
    """A log-linear tail fit did not reach the required goodness of fit."""


class ModelFileError(RwtailError):
    """An input file could not be parsed into a model or network."""
