"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class DomainError(ValueError):
    """A parameter lies outside the region where a formula is defined."""


class CalibrationDomainError(DomainError):
    """A calibration bracket is non-positive at the requested epsilon.

    ``threshold`` is the largest epsilon below which the bracket stays
    positive (admissible epsilons satisfy ``epsilon < threshold``).
    """

    def __init__(self, message: str, threshold: float | None = None):
        super().__init__(message)
        self.threshold = threshold


class ConfigurationError(ValueError):
    """Inconsistent discretization or run configuration."""


class EstimationError(ValueError):
    """Not enough usable data for an estimator."""


class NumericalError(RuntimeError):
    """Quadrature or root finding failed to converge."""


class SolverError(NumericalError):
    """A root bracket could not be established."""


class ResourceError(RuntimeError):
    """A run would exceed the configured memory/path-length cap."""
