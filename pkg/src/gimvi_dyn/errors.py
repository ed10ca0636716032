"""Exception hierarchy shared by every module."""


class GimviError(Exception):
    """Base class for all package errors."""


class RecipeInfeasible(GimviError):
    pass


class NonPositiveC(GimviError):
    pass


class NegativeDiscriminant(GimviError):
    pass


class InnerSolveFailed(GimviError):
    pass


class StepDiverged(GimviError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class Diverged(GimviError):
    def __init__(self, message, k=None):
        super().__init__(message)
        self.k = k


class LengthTooShort(GimviError):
    pass


class InvalidXi(GimviError):
    pass


class EmptyRegion(GimviError):
    pass


class NoConvergence(GimviError):
    pass


class DegenerateData(GimviError):
    """Raised by the rate fits when the series has already collapsed.

    ``slope`` carries the ``-inf`` sentinel so callers can treat the run as
    converged.
    """

    def __init__(self, message, slope=float("-inf")):
        super().__init__(message)
        self.slope = slope
