"""Exception types raised across the package."""


class ApproxGPDMError(Exception):
    """Base class for all package errors."""


class InputError(ApproxGPDMError, ValueError):
    """Malformed user input (bad shapes, missing history, invalid config)."""


class DimensionMismatch(InputError):
    pass


class NonFinite(InputError):
    pass


class InsufficientHistory(InputError):
    pass


class DomainError(InputError):
    pass


class ZeroInitialState(InputError):
    pass


class NumericalError(ApproxGPDMError, ArithmeticError):
    """A computation broke down numerically."""


class NumericalBreakdown(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class DegenerateVariance(NumericalError):
    pass


class UnboundedKernel(InputError):
    """The kernel family has no finite supremum (e.g. the linear kernel)."""


class NoImprovementWarning(UserWarning):
    """Hyperparameter search never improved on its starting points."""
