"""Exception types shared across the package."""


class CurventkError(Exception):
    """Base class for all package errors."""


class DomainError(CurventkError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(CurventkError, ValueError):
    """A parameter combination is invalid (e.g. depth too small for a scale)."""


class NumericError(CurventkError, ArithmeticError):
    """A numerical procedure failed to converge or verify."""


class ResolutionError(CurventkError, ValueError):
    """A sample grid is too coarse for the requested quantity."""


class DegenerateCurveError(CurventkError, ValueError):
    """A curve has (numerically) vanishing speed somewhere."""


class ConstructionError(CurventkError, RuntimeError):
    """A built-in geometry could not be constructed (e.g. root bracketing failed)."""
