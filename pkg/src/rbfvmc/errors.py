"""Exception hierarchy shared by every rbfvmc module."""


class RbfVmcError(Exception):
    """Base class for all errors raised by rbfvmc."""


class ContractViolation(RbfVmcError, ValueError):
    """An argument broke a documented precondition (shape, range, kind)."""


class NumericalFailure(RbfVmcError, ArithmeticError):
    """A computation produced a non-finite value."""


class DivisionHazard(NumericalFailure):
    """An amplitude fell below the floor used before dividing by it."""


class DerivativeSingularity(NumericalFailure):
    """A log-derivative is undefined at the current parameters (b_i == 0)."""


class SizeError(RbfVmcError):
    """A dense object would exceed the configured size cap."""


class OptimizerFailure(RbfVmcError):
    """Stochastic reconfiguration could not produce a usable update.

    ``record`` carries the partial run trace when the optimizer aborts.
    """

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


class OracleFailure(RbfVmcError):
    """A reference computation did not converge."""


class ConfigError(RbfVmcError, ValueError):
    """An experiment configuration is malformed or inconsistent."""
