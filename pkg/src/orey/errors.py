"""Exception types raised across the package."""


class OreyError(Exception):
    """Base class for all package errors."""


class DomainError(OreyError, ValueError):
    """Argument outside the domain of a covariance or series function."""


class MissingMetadataError(OreyError, ValueError):
    """Orey index or normalizing constant not available for a model."""


class NumericalConsistencyError(OreyError, ArithmeticError):
    """A quantity that must be nonnegative came out clearly negative."""


class SimulationError(OreyError, RuntimeError):
    """Gaussian sampling failed (e.g. Cholesky breakdown after jitter)."""

    def __init__(self, message, pivot=None, replication=None):
        super().__init__(message)
        self.pivot = pivot
        self.replication = replication


class EmbeddingError(SimulationError):
    """Circulant embedding produced a significantly negative eigenvalue."""


class PathFormatError(OreyError, ValueError):
    """Malformed path CSV."""


class DegenerateInputError(OreyError, ValueError):
    """A quadratic-variation statistic vanished, so the estimator is undefined."""


class TruncationError(OreyError, RuntimeError):
    """Requested series tolerance not reachable within the truncation cap."""
