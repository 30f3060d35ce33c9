"""Exception hierarchy shared by all rankfx modules."""


class RankFXError(ValueError):
    """Base class for every error raised on invalid input or degenerate data."""


class InvalidDataError(RankFXError):
    pass


class InsufficientReplicationError(RankFXError):
    def __init__(self, message, groups=()):
        super().__init__(message)
        self.groups = tuple(groups)


class DomainError(RankFXError):
    pass


class LayoutError(RankFXError):
    pass


class InvalidContrastError(RankFXError):
    pass


class DegenerateError(RankFXError):
    """Raised when a statistic is undefined for the data (zero trace, zero rank, all ties)."""


class InternalConsistencyError(RuntimeError):
    """An estimator produced a value that indicates a bug rather than bad input."""
