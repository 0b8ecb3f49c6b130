"""Exception types shared across the package.

Split into two families so the CLI can map them onto exit codes:
``ConfigError`` covers bad user input (exit code 2), ``NumericError``
covers runtime numerical failures (exit code 3).
"""


class EigenkernelsError(Exception):
    """Base class for all package errors."""


class ConfigError(EigenkernelsError):
    """Invalid configuration, file format, or command usage."""


class InvalidInputError(EigenkernelsError, ValueError):
    """An argument violates a documented precondition."""


class ContractViolationError(EigenkernelsError):
    """An API was called out of order (e.g. stale forward cache)."""


class NumericError(EigenkernelsError, RuntimeError):
    """A numerical procedure failed (non-convergence, non-finite values)."""


class NotSPDError(NumericError):
    """Cholesky factorization hit a non-positive pivot."""


class DegenerateBatchError(NumericError):
    """A batch normalizer saw an all-zero batch (sigma == 0)."""


class IllConditionedError(NumericError):
    """An operation would divide by a near-zero eigenvalue."""


class UnsupportedExtensionError(InvalidInputError):
    """A kernel defined only on its training points was queried elsewhere."""


class ResourceLimitError(InvalidInputError):
    """A dense oracle was asked to exceed its documented size cap."""


class ModelFormatError(ConfigError):
    """A serialized model file is corrupt or has an incompatible version."""
