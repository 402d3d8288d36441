"""Exception types raised by the numeric pipeline."""


class IWVError(Exception):
    """Base class for all package errors."""


class GridTooNarrow(IWVError):
    """The sampling window leaves too much probability mass outside."""


class GridAliasing(IWVError):
    """A momentum-space phase is under-resolved on the transform grid."""


class UnstableCurvature(IWVError):
    """Finite-difference Fisher estimates disagree between step sizes."""


class DegenerateParams(IWVError):
    """Parameters for which the requested quantity is identically zero or undefined."""


class BoundaryMaximum(IWVError):
    """The likelihood maximum sits on the edge of the search interval."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate
