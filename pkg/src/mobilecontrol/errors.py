"""Exception hierarchy shared by the solver, synthesis and harness layers."""


class MobileControlError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(MobileControlError, ValueError):
    pass


class MMatrixViolation(InvalidArgumentError):
    """The implicit step matrix is not certified to be an M-matrix."""


class NonConvergenceError(MobileControlError):
    def __init__(self, message, residual=None, time=None, history=None):
        super().__init__(message)
        self.residual = residual
        self.time = time
        self.history = history


class InfeasibleError(MobileControlError):
    """A synthesis stage could not meet its certified budget."""

    def __init__(self, message, best=None, partial=None):
        super().__init__(message)
        self.best = best
        self.partial = partial


class DecompositionInfeasible(InfeasibleError):
    pass


class StageInfeasible(InfeasibleError):
    pass


class ControlInfeasible(InfeasibleError):
    pass


class LiftingInfeasible(InfeasibleError):
    pass


class BallViolation(MobileControlError):
    def __init__(self, message, sup_norm=None, history=None):
        super().__init__(message)
        self.sup_norm = sup_norm
        self.history = history


class ConfigError(MobileControlError):
    pass
