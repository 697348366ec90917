"""Exception hierarchy shared across the package."""


class CuspError(Exception):
    """Base class for all package errors."""


class ParameterDomainError(CuspError, ValueError):
    """A distribution or prior parameter lies outside its domain."""


class ShapeError(CuspError, ValueError):
    """Array dimensions are inconsistent."""


class NumericalError(CuspError, ArithmeticError):
    """A factorization failed even after diagonal jitter."""


class DegenerateDistributionError(CuspError, ValueError):
    """A discrete distribution has no mass anywhere."""


class ConfigError(CuspError, ValueError):
    """A run configuration is invalid."""


class UndefinedESSError(CuspError, ValueError):
    """Effective sample size is undefined (e.g. a constant trace)."""


class EmptyResultError(CuspError, ValueError):
    """No successful replicate to summarize."""


class ParseError(CuspError, ValueError):
    """Malformed input file."""


class IntegrityError(CuspError):
    """Persisted draws disagree with their manifest."""
