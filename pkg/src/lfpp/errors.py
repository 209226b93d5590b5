"""Exception types shared across the package.

The CLI maps these onto exit codes: geometry and domain problems are usage
errors (2), budget overruns are resource errors (3) and anything that signals
a failed numerical guarantee is a numerical error (4).
"""


class GeometryError(ValueError):
    """A point or rectangle is not where the operation needs it to be."""


class DegenerateScaleError(GeometryError):
    """A scale is too small for its integer rounding to be meaningful."""


class ResourceError(RuntimeError):
    """A request exceeds a configured size or work budget."""


class NumericalError(ArithmeticError):
    """A numerical routine failed to meet its accuracy contract."""


class QuadratureError(NumericalError):
    pass


class ResolutionError(ValueError):
    """A sampled path is too coarse for tick detection at the requested scale."""
