"""Exception hierarchy shared by every module of the package."""


class DrmcoError(Exception):
    """Base class for all errors raised by this package."""


class NumericalFailure(DrmcoError):
    """The LP engine could not reach a solution within tolerance."""


class InfeasibleProblem(DrmcoError):
    """A subproblem that must be feasible turned out to be infeasible."""


class MixedUncertainty(DrmcoError):
    """A stage has uncertainty in both the objective and the right-hand side."""


class UnboundedLipschitz(DrmcoError):
    """No finite state-Lipschitz bound can be derived for a stage."""


class UnboundedUncertainty(DrmcoError):
    """An oracle that needs a compact uncertainty set received an unbounded one."""


class MissingGrowthRate(DrmcoError):
    """Unbounded uncertainty set without a declared growth rate."""


class TooManyVertices(DrmcoError):
    """Lifted vertex enumeration exceeded its configured cap."""


class CutRejected(DrmcoError):
    """A cut gradient violates the regularization bound."""


class OracleFailure(DrmcoError):
    """An oracle failed; carries the stage and iteration where it happened."""

    def __init__(self, message, stage=None, iteration=None):
        super().__init__(message)
        self.stage = stage
        self.iteration = iteration


class NonPsdCovariance(DrmcoError):
    """A covariance matrix has a clearly negative eigenvalue."""


class DegenerateSample(DrmcoError):
    """Too few or non-positive samples for a lognormal fit."""


class ConfigError(DrmcoError):
    """An experiment configuration or instance document is invalid."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
