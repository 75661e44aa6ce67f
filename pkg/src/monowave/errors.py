"""Exception types raised by the library."""


class MonowaveError(Exception):
    """Base class for library errors."""


class EmptyWindow(MonowaveError, ValueError):
    """No eigenvalue lies in the requested spectral window."""


class RadiusTooLarge(MonowaveError, ValueError):
    """Ball radius is not below the injectivity radius of the model."""


class EtaExceedsT(MonowaveError, ValueError):
    """Window width is not strictly below the center frequency."""


class DomainError(MonowaveError, ValueError):
    """Argument lies outside the domain where a quantity is defined."""


class MemoryGuard(MonowaveError, MemoryError):
    """A planned computation would exceed the configured memory budget."""


class ConfigError(MonowaveError, ValueError):
    """Experiment configuration is malformed or violates a precondition."""
