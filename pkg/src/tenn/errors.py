"""Exception hierarchy shared by every module of the package."""


class TennError(Exception):
    """Base class for all errors raised by :mod:`tenn`."""


class ConfigurationError(TennError, ValueError):
    """Invalid order, shape, layout or configuration value."""


class SingularityError(TennError, ArithmeticError):
    """Division by a zero value during jet evaluation.

    ``where`` holds the batch indices (or the evaluation points, when the
    caller knows them) at which the denominator vanished.
    """

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class NumericError(TennError, FloatingPointError):
    """A non-finite number showed up where a finite one is required."""


class DivergenceError(NumericError):
    """Training loss exceeded the divergence guard.

    The partial training report is attached as ``report``.
    """

    def __init__(self, message, report=None, params=None):
        super().__init__(message)
        self.report = report
        self.params = params


class CheckpointError(TennError):
    """Base class for checkpoint read failures."""


class CorruptCheckpointError(CheckpointError):
    """File is truncated or does not carry the checkpoint magic."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint was written by an incompatible format version."""


class SpecMismatchError(CheckpointError):
    """Checkpoint belongs to a different network architecture."""
