"""Exception hierarchy shared by all layers."""


class TdsicError(Exception):
    pass


class DimensionError(TdsicError, ValueError):
    pass


class DegenerateSetError(TdsicError):
    pass


class SymmetryViolationError(TdsicError):
    pass


class DomainError(TdsicError, ValueError):
    pass


class DivergenceError(TdsicError):
    pass


class NonConvergenceError(TdsicError):
    """Iteration budget exhausted. Carries the residual histories."""

    def __init__(self, message, orbital_history=(), symmetry_history=()):
        super().__init__(message)
        self.orbital_history = list(orbital_history)
        self.symmetry_history = list(symmetry_history)


class StallError(TdsicError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class StabilityError(TdsicError):
    pass


class ConfigError(TdsicError):
    def __init__(self, message, key=None, line=None):
        super().__init__(message)
        self.key = key
        self.line = line


class InsufficientDataError(TdsicError, ValueError):
    pass
