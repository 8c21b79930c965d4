"""General-purpose errors used throughout iscat.

Every error carries a ``code`` which the command line maps onto its exit
status: 2 for configuration problems, 3 for numerical failures and 4 for
storage failures.
"""


class Error(Exception):
    """Base class for exceptions."""

    code = 1


class ConfigError(Error):
    """An experiment configuration is malformed or out of range."""

    code = 2


class InvalidArgumentError(Error, ValueError):
    """An argument violates an operation's precondition."""

    code = 2


class DomainError(InvalidArgumentError):
    """A special function was evaluated outside its domain."""


class ShapeMismatchError(InvalidArgumentError):
    """Two arrays that must share a shape do not."""


class EmptyPhantomError(InvalidArgumentError):
    """A glyph raster carries no signal, so it cannot define a scatterer."""


class PhantomGenerationError(Error):
    """Random phantom generation exhausted its retries."""


class SingularityError(InvalidArgumentError):
    """A source coincides with an observation point."""


class DegenerateError(InvalidArgumentError):
    """A quantity is undefined because its denominator vanishes."""


class UndefinedBetaError(DegenerateError):
    """The batch regularization weight is undefined for zero-contrast batches."""


class NumericError(Error):
    """A numerical procedure failed."""

    code = 3


class ConvergenceError(NumericError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super(ConvergenceError, self).__init__(message)
        self.residual = residual
        self.iterations = iterations


class SeriesConvergenceError(ConvergenceError):
    """A truncated series did not meet its stopping rule."""


class DivergenceError(NumericError):
    """A value became non-finite during optimization."""

    def __init__(self, message, diagnostics=None, last_good=None):
        super(DivergenceError, self).__init__(message)
        self.diagnostics = diagnostics or {}
        self.last_good = last_good


class StaleCacheError(Error):
    """A forward cache no longer matches the parameters it was built from."""


class StoreError(Error):
    """Persisted data could not be read or written."""

    code = 4


class BadMagicError(StoreError):
    """A binary record does not start with the expected magic bytes."""


class TruncationError(StoreError):
    """A binary record is shorter than its header implies."""

    def __init__(self, message, expected=None, actual=None):
        super(TruncationError, self).__init__(message)
        self.expected = expected
        self.actual = actual


class VersionMismatchError(StoreError):
    """A persisted file was written by an incompatible format version."""


class ChecksumError(StoreError):
    """A dataset file does not match the checksum in its manifest."""
