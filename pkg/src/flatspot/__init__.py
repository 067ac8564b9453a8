"""Circle maps with a flat spot: partitions, scaling geometry, dimension estimators."""

__version__ = "0.1.0"

from .flatmap import FlatMap
from .geometry import CircleArc, CirclePoint, PrecisionExhausted, working_precision
from .rotation import ContinuedFraction, RotationTarget, tune_offset

__all__ = [
    "FlatMap",
    "CircleArc",
    "CirclePoint",
    "PrecisionExhausted",
    "working_precision",
    "ContinuedFraction",
    "RotationTarget",
    "tune_offset",
]
