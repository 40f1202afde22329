"""Exception types raised across the package."""


class EignetError(Exception):
    """Base class for all package errors."""


class DomainError(EignetError, ValueError):
    """An argument lies outside the domain of the operation."""


class CapacityError(EignetError, ValueError):
    """A requested degree or index exceeds what the configured object supports."""


class ParameterError(EignetError, ValueError):
    pass


class InvalidKernelError(EignetError, ValueError):
    pass


class PreconditionError(EignetError, ValueError):
    pass


class CoverageError(EignetError, ValueError):
    """Target spectrum intersects degrees the kernel cannot reproduce."""

    def __init__(self, message, uncovered=()):
        super().__init__(message)
        self.uncovered = tuple(uncovered)


class CompatibilityError(EignetError, ValueError):
    pass


class DegenerateInputError(EignetError, ValueError):
    pass


class ConfigError(EignetError, ValueError):
    pass


class DataError(EignetError, ValueError):
    pass
