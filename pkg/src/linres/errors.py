"""Exception types shared across the package."""


class LinresError(Exception):
    """Base class for all package errors."""


class DomainError(LinresError, ValueError):
    """Input outside the mathematical domain of an operation."""


class ValidationError(LinresError, ValueError):
    """Model specification violates a structural requirement."""


class GapError(LinresError, RuntimeError):
    """A required spectral gap is absent or below tolerance."""


class ResourceError(LinresError, RuntimeError):
    """Problem size exceeds the configured resource budget."""


class IntegrationError(LinresError, RuntimeError):
    """Time propagation failed its accuracy or unitarity contract."""


class QuadratureError(LinresError, RuntimeError):
    """Numerical quadrature cannot reach the requested tolerance."""


class ConfigError(LinresError, ValueError):
    """Experiment configuration is malformed or inconsistent."""
