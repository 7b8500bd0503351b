"""Exception types raised across the package."""


class SigfitError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SigfitError, ValueError):
    """Inconsistent or invalid parameters."""


class SizeError(SigfitError, ValueError):
    """Array extents do not match what an operation requires."""


class DomainError(SigfitError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class DetectionError(SigfitError, RuntimeError):
    """Singularity detection produced an unusable region structure."""


class SolverError(SigfitError, RuntimeError):
    """Linear algebra failure while fitting."""


class RefinementWarning(RuntimeWarning):
    """Iterative refinement failed to reduce the residual."""
