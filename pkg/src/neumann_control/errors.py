"""Exception hierarchy shared by all modules."""


class NeumannControlError(Exception):
    """Base class for all package errors."""


class InvalidAngleError(NeumannControlError, ValueError):
    pass


class ConfigurationError(NeumannControlError, ValueError):
    pass


class MeshQualityError(NeumannControlError):
    pass


class AssemblyError(NeumannControlError):
    pass


class EvaluationError(NeumannControlError, ValueError):
    pass


class SolverBreakdownError(NeumannControlError):
    pass


class InvalidBoundsError(NeumannControlError, ValueError):
    pass


class ClassificationError(NeumannControlError):
    pass


class NewtonConvergenceError(NeumannControlError):
    """Newton iteration hit its cap; ``history`` holds the residual norms."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class NewtonDivergenceError(NewtonConvergenceError):
    pass


class IndefiniteHessianError(NeumannControlError):
    pass


class PdasCyclingError(NeumannControlError):
    """PDAS did not reach a fixed point; ``best`` is the last iterate."""

    def __init__(self, message, best=None, history=()):
        super().__init__(message)
        self.best = best
        self.history = list(history)


class SqpConvergenceError(NeumannControlError):
    def __init__(self, message, log=()):
        super().__init__(message)
        self.log = list(log)


class EocDomainError(NeumannControlError, ValueError):
    pass
