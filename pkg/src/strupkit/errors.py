"""Exception hierarchy shared across the package."""


class StrupkitError(Exception):
    """Base class for all package errors."""


class DimensionError(StrupkitError, ValueError):
    pass


class EvaluationError(StrupkitError, ArithmeticError):
    """A map or Hamiltonian produced non-finite values."""


class NumericOverflowError(EvaluationError):
    pass


class CapabilityError(StrupkitError):
    """The requested operation is not supported for this object."""


class ConfigurationError(StrupkitError, ValueError):
    pass


class ArgumentError(StrupkitError, ValueError):
    pass


class AccuracyError(StrupkitError):
    """The reference integrator could not reach the requested accuracy."""


class ConvergenceError(StrupkitError):
    pass


class DivergenceError(StrupkitError):
    def __init__(self, epoch, loss):
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")
        self.epoch = epoch
        self.loss = loss


class FactorizationError(StrupkitError):
    def __init__(self, message, residual=None):
        super().__init__(message if residual is None else f"{message} (residual={residual:.3e})")
        self.residual = residual


class UnknownSystemError(StrupkitError, LookupError):
    pass


class UndefinedMetricError(StrupkitError, ValueError):
    pass
