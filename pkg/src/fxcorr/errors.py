"""Exception and warning types shared across the library."""


class FxCorrError(Exception):
    """Base class for all errors raised by fxcorr."""


class SchemaError(FxCorrError):
    """A structured document does not conform to its schema.

    ``field`` is a path like ``vols[1].points[0].sigma``; ``line`` is set
    only when the underlying text could not be parsed at all.
    """

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        parts = [message]
        if field is not None:
            parts.append(f"field: {field}")
        if line is not None:
            parts.append(f"line: {line}")
        super().__init__("; ".join(parts))


class ValidationError(FxCorrError):
    """Input data violates a documented invariant."""


class CalendarArbitrageError(ValidationError):
    """Total variance decreases with maturity, so a forward variance is negative."""


class MissingDataError(FxCorrError):
    """A required quote (spot, vol, or rate) is not present in the snapshot."""


class NoImpliedVolError(FxCorrError):
    """The target price lies outside the no-arbitrage band, so no vol reproduces it.

    ``reason`` is one of ``below_intrinsic``, ``above_cap``, or
    ``exceeds_bracket`` (root above the maximum search bracket of 10.0).
    """

    def __init__(self, message: str, reason: str):
        self.reason = reason
        super().__init__(message)


class CorrelationRangeError(FxCorrError):
    """An implied correlation fell outside [-1, 1] and clamping was not requested."""


class UndefinedCorrelationError(FxCorrError):
    """A correlation formula hit a zero denominator (zero-variance leg)."""


class FactorizationError(FxCorrError):
    """A correlation matrix bucket is indefinite and cannot be factorized."""


class ExtrapolationWarning(UserWarning):
    """A term structure was evaluated beyond its last quoted maturity."""


class CorrelationClampWarning(UserWarning):
    """An out-of-range implied correlation was clamped to the nearest bound."""
