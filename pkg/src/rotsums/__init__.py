"""Exact continued-fraction machinery for Birkhoff sums of 1/x-type
observables over circle rotations."""

from rotsums.errors import (
    InsufficientDepth,
    InvariantViolation,
    KindMismatch,
    LevelTooLarge,
    PointOutsideDomain,
    RotsumsError,
    SingularHit,
)

__version__ = "0.1.0"

__all__ = [
    "InsufficientDepth",
    "InvariantViolation",
    "KindMismatch",
    "LevelTooLarge",
    "PointOutsideDomain",
    "RotsumsError",
    "SingularHit",
    "__version__",
]
