"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems, data problems
and numerical failures are kept distinguishable.
"""


class CompDlmError(Exception):
    """Base class for all package-specific errors."""


class InvalidScaleError(CompDlmError, ValueError):
    """A matrix that must be symmetric positive definite is not."""


class InvalidDofError(CompDlmError, ValueError):
    """A degrees-of-freedom parameter is out of its valid range."""


class DegenerateDofError(InvalidDofError):
    """Discount evolution drove a degrees-of-freedom parameter to <= 0."""


class PartitionError(CompDlmError, ValueError):
    """A block partition request is inconsistent with the matrix dimensions."""


class InputError(CompDlmError, ValueError):
    """Invalid caller-supplied data: non-finite values, bad shapes, empty ensembles."""


class ModeError(CompDlmError, ValueError):
    """An operation was requested under a configuration that does not support it."""


class ConfigError(CompDlmError, ValueError):
    """A run configuration file is missing, malformed, or inconsistent."""


class DataError(InputError):
    """A dataset file is malformed or inconsistent with the configuration."""


class FilterError(CompDlmError, RuntimeError):
    """A sequential filter step failed; the message names the time index."""
