class GroundcutError(Exception):
    """Base class for all package errors."""


class ParseError(GroundcutError):
    """Malformed scan, label or config file."""


class DomainError(GroundcutError, ValueError):
    """Geometric formula evaluated outside its valid domain."""


class SeedingError(GroundcutError):
    """Not enough high-confidence seeds to build the height histograms."""


class UsageError(GroundcutError, ValueError):
    """Caller passed inconsistent arguments."""


class ConfigError(GroundcutError):
    """Invalid pipeline configuration."""
