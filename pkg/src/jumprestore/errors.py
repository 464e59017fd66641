class JumpRestoreError(Exception):
    """Base class for all package errors."""


class InvalidInputError(JumpRestoreError, ValueError):
    pass


class InvalidParameterError(JumpRestoreError, ValueError):
    pass


class CapabilityError(JumpRestoreError, TypeError):
    """A density lacks something an operation needs (usually ``grad_log``)."""


class UndefinedGradientError(JumpRestoreError, ValueError):
    pass


class EmptyEstimateError(JumpRestoreError, ValueError):
    """Raised when an estimate would divide by zero total weight."""


class PreconditionError(JumpRestoreError, ValueError):
    pass


class ReducibilityError(JumpRestoreError, ValueError):
    pass


class KappaTooSmallError(JumpRestoreError, ValueError):
    """The general killing rate went negative; ``minimal_kappa0`` is admissible."""

    def __init__(self, message, minimal_kappa0, witness_state):
        super().__init__(message)
        self.minimal_kappa0 = minimal_kappa0
        self.witness_state = witness_state
