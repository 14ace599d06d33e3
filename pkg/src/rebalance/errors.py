"""Exception hierarchy shared by every module."""


class RebalanceError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(RebalanceError, ValueError):
    """Invalid distribution, target, generator or pipeline settings."""


class DomainError(RebalanceError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class FormulaDomainError(DomainError):
    """A closed-form expression evaluated to an undefined quantity."""


class InsufficientDataError(RebalanceError, ValueError):
    """Too few source points for the requested generator or subsample."""


class AbsoluteContinuityError(RebalanceError, ValueError):
    """A distribution puts mass where the reference measure has none."""


class DegeneratePriorError(RebalanceError, ValueError):
    """Empirical class prior is 0 or 1, so reweighting is undefined."""


class DegenerateSeparationError(RebalanceError):
    """The unregularized cross-entropy minimum is at infinity.

    Raised for single-class data and for linearly separable data.
    """


class ConvergenceError(RebalanceError, RuntimeError):
    """The optimizer hit its iteration budget.

    Attributes
    ----------
    model : LogisticModel
        The last iterate.
    grad_norm : float
        Gradient norm at the last iterate.
    """

    def __init__(self, message, model=None, grad_norm=float("nan")):
        super().__init__(message)
        self.model = model
        self.grad_norm = grad_norm


class PipelineError(RebalanceError):
    """A generator or ERM failure, wrapped with the pipeline that hit it.

    The original exception is available as ``__cause__`` and ``cause``.
    """

    def __init__(self, message, cause):
        super().__init__(message)
        self.cause = cause
