"""Exception types shared across the package."""


class MeyerError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateBasis(MeyerError):
    """Lattice basis is singular or numerically too close to singular."""


class NonIntegerDiscreteCoordinates(MeyerError):
    """A generator has non-integer coordinates in the discrete block."""


class EnumerationBudgetExceeded(MeyerError):
    """Predicted candidate count of a lattice enumeration exceeds the cap."""


class WindowTooLarge(MeyerError):
    """The norm box does not fit inside the truncated patch."""


class InsufficientPeakCoverage(MeyerError):
    """Peak list does not cover the region needed at the requested accuracy."""


class ExclusionTooClose(MeyerError):
    """Excluded internal point is too close to the window for the margins."""


class NegativePart(MeyerError):
    """A measure that must be positive has a negative component."""


class InvalidThreshold(MeyerError):
    """Level-set threshold outside the admissible range."""


class UnsupportedDimension(MeyerError):
    """Operation only implemented for one-dimensional direct space."""
