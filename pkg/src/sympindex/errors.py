"""Exception hierarchy shared by all modules."""


class SympIndexError(Exception):
    """Base class for every error raised by the package."""


class DimensionMismatch(SympIndexError, ValueError):
    pass


class DegenerateRestriction(SympIndexError):
    """A form restricted to a subspace has a nontrivial kernel."""


class AssumptionViolation(SympIndexError):
    """Initial data make ``B(a)^{-1}`` degenerate on ``P``."""


class InvalidCoefficients(SympIndexError):
    """Coefficients fail symmetry, invertibility or constant-inertia checks."""


class SympDrift(SympIndexError):
    """Fundamental matrix drifted away from the symplectic group."""


class SingularIsomorphism(SympIndexError):
    pass


class ContinuationBreakdown(SympIndexError):
    pass


class EmptyIntersection(SympIndexError):
    pass


class DegenerateCrossing(SympIndexError):
    """A focal instant whose crossing form is singular."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class AccumulationSuspected(SympIndexError):
    pass


class StillDegenerate(SympIndexError):
    pass


class FrameRankLoss(SympIndexError):
    pass


class QNotContained(SympIndexError):
    pass


class FramesSpanDiffer(SympIndexError):
    pass


class InvalidDistribution(SympIndexError):
    pass


class UnknownName(SympIndexError, KeyError):
    pass


class DegenerateMetricOnP(SympIndexError):
    pass


class DegenerateVerticalHessian(SympIndexError):
    pass


class BlowUp(SympIndexError):
    pass
