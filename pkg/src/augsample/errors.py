"""Exception types shared across the package."""


class MatrixFormatError(ValueError):
    """A matrix file failed to parse or contained invalid values."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap before meeting its tolerance.

    For the sensitivity oracle, ``lower`` and ``upper`` bracket the optimum
    of the row program at the point the solver gave up.
    """

    def __init__(self, message, lower=None, upper=None):
        super().__init__(message)
        self.lower = lower
        self.upper = upper


class MuUnboundedError(RuntimeError):
    """The one-sidedness parameter was flagged unbounded and no override was given.

    Sampling guarantees for asymmetric losses are vacuous on such data; the
    caller must pass an explicit value to proceed.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NonFiniteLossError(RuntimeError):
    """Training encountered a non-finite loss; carries the last finite iterate."""

    def __init__(self, message, iterate=None):
        super().__init__(message)
        self.iterate = iterate
