class RotsumsError(Exception):
    pass


class InsufficientDepth(RotsumsError):
    """The expansion terminates (or was truncated) before the level a caller needs."""


class PointOutsideDomain(RotsumsError, ValueError):
    pass


class SingularHit(RotsumsError, ArithmeticError):
    """An orbit point landed exactly on the singularity at 0 (equivalently 1)."""


class KindMismatch(RotsumsError, TypeError):
    pass


class LevelTooLarge(RotsumsError):
    """Materializing this partition level would exceed the interval cap."""


class InvariantViolation(RotsumsError, AssertionError):
    pass
