"""Exception hierarchy shared by every module of the package."""


class SurvivalError(Exception):
    """Base class for all package errors."""


class NoEvents(SurvivalError, ValueError):
    """Raised when an estimator needs at least one observed event."""


class InvalidCHF(SurvivalError, ValueError):
    """Raised when values violate the cumulative-hazard invariants."""


class NoComparablePairs(SurvivalError, ValueError):
    pass


class DimensionMismatch(SurvivalError, ValueError):
    pass


class GridMismatch(SurvivalError, ValueError):
    pass


class Diverged(SurvivalError, RuntimeError):
    """Newton iterations failed to converge or hit the separation guard."""


class DatasetTooSmall(SurvivalError, ValueError):
    pass


class NumericalFailure(SurvivalError, RuntimeError):
    """The LP solver could not certify its answer."""


class PointOutsideBall(SurvivalError, ValueError):
    pass


class InvalidQR(SurvivalError, ValueError):
    pass


class SingularSystem(SurvivalError, RuntimeError):
    pass


class SchemaMismatch(SurvivalError, ValueError):
    pass


class EmptyAfterFiltering(SurvivalError, ValueError):
    pass


class MalformedReport(SurvivalError, ValueError):
    pass


class EmptyInput(SurvivalError, ValueError):
    pass


class IoError(SurvivalError, OSError):
    """A file could not be read or written."""
