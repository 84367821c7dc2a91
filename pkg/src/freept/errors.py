"""Exception types shared across the package."""


class FreePTError(Exception):
    """Base class for all package errors."""


class DomainError(FreePTError, ValueError):
    """Input lies outside the mathematical domain of an operation."""


class ResourceError(FreePTError, RuntimeError):
    """Requested computation exceeds a configured size or memory cap."""
