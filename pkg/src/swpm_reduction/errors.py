"""Exceptions raised by the reduction pipeline."""


class ReductionError(ValueError):
    """Base class for all reduction failures."""


class DegenerateCovariance(ReductionError):
    """Group covariance is rank deficient; the group must pass through unreduced."""


class SingularSystem(ReductionError):
    """A progenitor system could not be pivoted (velocity placement violates invertibility)."""


class SpeedTooSmall(ReductionError):
    """A fixed speed parameter lies below the positivity bound of the scheme."""


class NegativeWeight(ReductionError):
    """A closed-form weight came out negative for the requested speed."""


class NoFeasibleSpeed(ReductionError):
    """No speed parameter up to the search cap makes every weight nonnegative."""
