"""Exception types shared across the package.

Everything derives from ValueError or RuntimeError so callers that do not
care about the fine distinctions can still catch the obvious base class.
"""


class ShapeError(ValueError):
    """An array argument has the wrong shape or dtype family."""


class InvalidOrderError(ValueError):
    """A transform order is not a finite real scalar."""


class EntropyUndefinedError(ValueError):
    """Spectral entropy requested for an all-zero signal."""


class DegenerateAffineError(ValueError):
    """Instance denormalization attempted with a zero scale coefficient."""


class DivergedForwardError(RuntimeError):
    """A forward pass produced non-finite activations."""


class InsufficientDataError(ValueError):
    """A split or panel is too short to produce a single window."""


class CsvParseError(ValueError):
    """A CSV cell or row could not be parsed.

    ``line`` is the 1-based physical line number, header included.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TimestampOrderError(CsvParseError):
    """Timestamps are not strictly increasing."""


class ConfigError(ValueError):
    """A run configuration value is missing, malformed, or out of range."""


class BudgetMismatchError(RuntimeError):
    """Compared runs trained under unequal epoch budgets."""
