"""Exception hierarchy shared by all estimator modules."""


class DistStateError(Exception):
    """Base class for every error raised by this package."""


class ContractError(DistStateError, ValueError):
    """An input violated an operation's precondition."""


class NumericalError(DistStateError, ArithmeticError):
    """A numerical kernel failed or produced an unusable result."""


class NotPositiveDefiniteError(NumericalError):
    pass


class InconsistentSystemError(NumericalError):
    """The stacked measurements are not in the range of the stacked model."""


class AlgorithmFailure(NumericalError):
    """A distributed algorithm broke one of its own guarantees."""


class ModelError(DistStateError):
    """A network or measurement model is malformed (e.g. disconnected)."""


class InsufficientDataError(DistStateError, ValueError):
    pass


class ConfigError(DistStateError, ValueError):
    """Bad experiment configuration or input file."""
