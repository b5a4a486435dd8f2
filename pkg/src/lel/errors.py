"""Exception hierarchy shared by all modules."""


class LELError(Exception):
    """Base class for every error raised by the package."""


class InvalidParameterError(LELError, ValueError):
    pass


class InvalidInputError(LELError, ValueError):
    pass


class FitError(LELError):
    """Raised when a least-squares fit is underdetermined or fails to converge.

    ``diagnostics`` carries condition numbers and the last iterate.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SingularEvaluationError(LELError, ValueError):
    pass


class DomainError(LELError, ValueError):
    pass


class NearBoundaryError(DomainError):
    pass


class GeometryError(LELError, ValueError):
    pass


class MeshError(LELError):
    pass


class LocationError(LELError, ValueError):
    pass


class StiffnessError(LELError):
    def __init__(self, message, s=None):
        super().__init__(message)
        self.s = s


class SolverOverflowError(LELError, ArithmeticError):
    pass


class ConvergenceError(LELError):
    """Iterative solve did not converge.

    ``history`` holds per-iteration residual norms, ``last`` the final iterate.
    """

    def __init__(self, message, history=None, last=None, diagnostics=None):
        super().__init__(message)
        self.history = list(history or [])
        self.last = last
        self.diagnostics = diagnostics or {}


class SingularJacobianError(ConvergenceError):
    pass


class EmptyPeakError(LELError):
    pass


class ConfigError(LELError, ValueError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
