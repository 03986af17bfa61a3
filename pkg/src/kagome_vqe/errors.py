"""Exception types shared across the package."""


class KagomeVQEError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgument(KagomeVQEError, ValueError):
    pass


class InvalidState(KagomeVQEError, RuntimeError):
    """Raised when an operation needs a fully bound circuit but got slots."""


class UnsupportedGate(KagomeVQEError, ValueError):
    pass


class SizeLimit(KagomeVQEError, ValueError):
    pass


class ConfigError(KagomeVQEError):
    pass
