"""Exception hierarchy shared across the package."""


class RadialError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(RadialError, ValueError):
    """Operands have incompatible shapes or lengths."""


class DomainError(RadialError, ValueError):
    """An input lies outside the mathematical domain of the operation."""


class ParameterError(RadialError, ValueError):
    """A hyperparameter violates its admissible range."""


class EmptyWindowError(RadialError, ValueError):
    """No training point falls inside the requested window."""


class ConfigurationError(RadialError, ValueError):
    """An experiment or backtest configuration cannot be satisfied by the data."""


class ParseError(RadialError, ValueError):
    """A data file could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
