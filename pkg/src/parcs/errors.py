"""Exception types shared across the toolkit."""


class ParcsError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(ParcsError, ValueError):
    """Invalid input data or configuration supplied by the caller."""


class NoVarianceError(ParcsError):
    """A computation required variance but the series is constant."""


class NegativeCountError(ValidationError):
    """Count data contained a negative value where counts were required."""


class InfeasibleBlocksError(ParcsError):
    """The block-permutation configuration leaves too few blocks to resample."""


class UnknownScenarioError(ValidationError):
    """A scenario preset name is not registered."""
