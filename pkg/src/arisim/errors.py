"""Exception types shared across the simulator."""


class ArisimError(Exception):
    """Base class for all simulator errors."""


class ValidationError(ArisimError, ValueError):
    """A value violates a documented invariant."""


class ParseError(ArisimError, ValueError):
    """A scenario file could not be read or decoded."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.key = key


class DepthOutOfRange(ArisimError, ValueError):
    pass


class InvalidLayerCount(ArisimError, ValueError):
    pass


class NoCriticalAngle(ArisimError, ValueError):
    pass


class DegenerateAngle(ArisimError, ValueError):
    pass


class NoEigenray(ArisimError):
    pass


class DimensionMismatch(ArisimError, ValueError):
    pass


class InsufficientPaths(ArisimError):
    pass


class EmptyMap(ArisimError):
    pass


class Infeasible(ArisimError):
    """Beam synthesis could not meet its constraints.

    ``family`` names the constraint group judged responsible.
    """

    def __init__(self, message: str, family: str):
        super().__init__(f"{message} [{family}]")
        self.family = family
