"""Exception types shared across the package."""


class CogsecError(Exception):
    """Base class for all package errors."""


class DomainError(CogsecError, ValueError):
    """An argument is outside the domain of the operation."""


class ParseError(CogsecError, ValueError):
    """A channel or policy document could not be parsed.

    ``location`` names the JSON field path or ``line:col`` of the failure.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{location}: {message}"
        super().__init__(message)


class ResourceError(CogsecError, RuntimeError):
    """A configured size cap would be exceeded."""


class ConsistencyError(CogsecError, ArithmeticError):
    """Internal numerical consistency check failed (not float noise)."""


class GenerationError(CogsecError, RuntimeError):
    """Random codebook generation could not find typical sequences."""
