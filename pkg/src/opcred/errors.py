"""Exception hierarchy shared by the library and the command line."""


class OpCredError(Exception):
    """Base class for all package errors."""


class ParseError(OpCredError):
    """A malformed row or document in an input file."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class ValidationError(OpCredError):
    """Input data violates a model invariant (threshold, duplicates, signs)."""


class ConfigError(OpCredError):
    """Missing or inconsistent cell configuration."""


class DomainError(OpCredError, ValueError):
    """An argument lies outside the domain of a formula."""


class InsufficientDataError(OpCredError):
    """Too few observations, cells or banks for an estimator."""


class DegenerateDataError(OpCredError):
    """Data make an estimator infinite or undefined."""


class ConvergenceError(OpCredError):
    """A fixed-point iteration did not converge.

    The last iterate is kept on ``last`` so a caller may accept it.
    """

    def __init__(self, message, last=None, iterations=0):
        super().__init__(message)
        self.last = last
        self.iterations = iterations
