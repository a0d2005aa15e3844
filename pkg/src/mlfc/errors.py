"""Exception and warning types raised across the package."""


class MlfcError(Exception):
    """Base class for all errors raised by this package."""


class BadShape(MlfcError):
    pass


class PartitionViolation(MlfcError):
    """A group or subgroup family is not a partition of its parent set.

    ``where`` carries the offending ``(l, k)`` or ``(l, k, c)`` address.
    """

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class BadStrategy(MlfcError):
    pass


class CycleDetected(MlfcError):
    pass


class NotATree(MlfcError):
    pass


class DegenerateModel(MlfcError):
    pass


class AlphabetViolation(MlfcError):
    pass


class EmptySubgroup(MlfcError):
    pass


class SimplexViolation(MlfcError):
    pass


class ShapeMismatch(MlfcError):
    pass


class DomainError(MlfcError, ValueError):
    pass


class NoSolution(MlfcError):
    """No allocation reaches the requested target; ``bracket`` is (lo, hi)."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class DegenerateInput(MlfcError):
    pass


class ZeroGain(MlfcError):
    pass


class ConfigError(MlfcError):
    """Invalid experiment configuration. ``field`` is a dotted path."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


class ZeroRateSubgroup(UserWarning):
    """Some subgroup has zero rate, so every allocation has objective 0."""
