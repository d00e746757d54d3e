"""Exception hierarchy shared by all modules."""


class RbcmechError(Exception):
    """Base class for all package errors."""


class MeshTopologyError(RbcmechError):
    """Mesh violates closedness, orientability or orientation invariants."""


class DegenerateTriangleError(RbcmechError):
    """A triangle is too close to degenerate for a geometric operator.

    Carries the offending triangle index in ``triangle``.
    """

    def __init__(self, triangle: int, message: str = ""):
        self.triangle = int(triangle)
        super().__init__(message or f"degenerate triangle {triangle}")


class CollapsedTriangleError(DegenerateTriangleError):
    """Current triangle collapsed relative to its reference (lambda_2 -> 0)."""


class ConvergenceError(RbcmechError):
    """An iterative solver failed to reach its tolerance."""


class InstabilityError(RbcmechError):
    """Time integration detected runaway energy growth."""


class FitError(RbcmechError):
    """A least-squares fit is singular or degenerate."""


class DataError(RbcmechError):
    """Dataset file violates its schema or value constraints."""


class ConfigError(RbcmechError):
    """Run configuration is invalid."""


class ExtrapolationWarning(UserWarning):
    """Surrogate evaluated outside its training bounds."""
