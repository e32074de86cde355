"""Exception hierarchy for the conflict-analysis pipeline.

Every error raised on purpose by this package derives from ``PipelineError``
so callers (notably the CLI) can map failures to exit codes without
inspecting messages.
"""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(PipelineError):
    """Malformed or inconsistent input data or configuration."""


class InsufficientData(PipelineError):
    """Not enough observations to perform the requested operation."""


class OutOfDomain(PipelineError):
    """Curve evaluation requested before the start of its domain."""


class OutOfRange(PipelineError):
    """Index outside the valid range of a trajectory."""


class NoCrossing(PipelineError):
    """The two paths involved never intersect, so the quantity is undefined."""


class DegenerateFit(PipelineError):
    """The likelihood has no finite interior maximum (separation, missing
    classes or a rank-deficient design matrix).

    ``columns`` names the offending design-matrix columns when they could be
    identified.
    """

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class NotConverged(PipelineError):
    """The optimizer stopped before reaching the gradient tolerance."""

    def __init__(self, message, iterations=None, grad_norm=None, loglik=None):
        super().__init__(message)
        self.iterations = iterations
        self.grad_norm = grad_norm
        self.loglik = loglik
