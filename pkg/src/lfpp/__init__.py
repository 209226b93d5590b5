"""Numerical laboratory for Liouville first-passage percolation on lattice rectangles."""
from .errors import (DegenerateScaleError, GeometryError, NumericalError, QuadratureError,
                     ResolutionError, ResourceError)
from .geometry import IntervalZ, RectRegion, ScaleParams, solve_delta

__all__ = [
    "DegenerateScaleError", "GeometryError", "NumericalError", "QuadratureError",
    "ResolutionError", "ResourceError", "IntervalZ", "RectRegion", "ScaleParams", "solve_delta",
]
__version__ = "0.1.0"
