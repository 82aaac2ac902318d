"""Exception hierarchy shared by all survgroup modules."""


class SurvGroupError(Exception):
    """Base class for every error raised by survgroup."""


class DataValidationError(SurvGroupError, ValueError):
    """Input data violates a dataset invariant (domain, missingness, no events)."""


class ParseError(DataValidationError):
    """A CSV cell could not be parsed; carries the 1-based row and column name."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ShapeError(SurvGroupError, ValueError):
    """Array arguments have incompatible lengths or dimensions."""


class GridError(SurvGroupError, ValueError):
    """A time grid is not strictly ascending."""


class EstimationError(SurvGroupError, ValueError):
    """A survival estimate cannot be formed for the requested selection."""


class ConfigError(SurvGroupError, ValueError):
    """A configuration object violates its invariants."""


class GenerationError(SurvGroupError, RuntimeError):
    """Synthetic data generation could not satisfy its constraints."""
