"""Exception hierarchy. The CLI maps these onto distinct exit codes."""


class HdvbError(Exception):
    """Base class for all package errors."""


class InputError(HdvbError):
    """Invalid user-supplied data (files, shapes, non-finite values)."""


class ShapeError(InputError):
    """Matrix/vector dimensions do not match the operation's contract."""


class ConfigError(InputError):
    """Invalid or inconsistent configuration."""


class EstimationError(HdvbError):
    """Failure while estimating or post-processing a model."""


class ConvergenceError(EstimationError):
    """Iterative method exhausted its budget.

    Carries the best iterate so callers can inspect how far it got.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
        self.converged = False


class NonStationaryError(EstimationError):
    """Companion spectral radius at or above one where stationarity is required."""


class NonInvertibleError(EstimationError):
    """VAR cannot be inverted into a moving-average representation."""


class SingularSystemError(EstimationError):
    """Linear solve hit an (almost) zero pivot."""


class NotPsdError(EstimationError):
    """Matrix required to be positive semi-definite has a material negative eigenvalue."""


class BootstrapError(HdvbError):
    """Failure inside the bootstrap loop."""


class ReplicateError(BootstrapError):
    """A single bootstrap replicate produced non-finite values.

    Records which replicate and which seed so it can be replayed in isolation.
    """

    def __init__(self, message, rep_index=None, rep_seed=None):
        super().__init__(message)
        self.rep_index = rep_index
        self.rep_seed = rep_seed
