"""Exception hierarchy shared across the package.

ValidationError subclasses map to CLI exit code 2, NumericalError
subclasses to exit code 5, ToleranceError to exit code 4.
"""


class BandshiftError(Exception):
    """Base class for all package errors."""


class ValidationError(BandshiftError):
    """Bad input, configuration, or violated precondition."""


class DegenerateLatticeError(ValidationError):
    """Lattice basis is singular (generators linearly dependent)."""


class EmptyBasisError(ValidationError):
    """Plane-wave basis came out empty (cutoff too small)."""


class BandTruncationError(ValidationError):
    """Requested bands do not safely cover the energy range."""


class BoxTooSmallError(ValidationError):
    """Periodic box violates the tail-truncation rule for the given coupling."""


class OutOfWindowError(ValidationError):
    """Energy lies outside the certified window / table coverage."""


class ResolutionError(ValidationError):
    """Smoothing width is below the spectral resolution floor."""


class InsufficientDataError(ValidationError):
    """Not enough data points for the requested fit."""


class HTooLargeError(ValidationError):
    """Semiclassical parameter too large: ball inclusions fail."""


class NumericalError(BandshiftError):
    """A numerical procedure failed to deliver a trustworthy result."""


class EigensolverError(NumericalError):
    """Eigensolve failed or produced residuals above tolerance."""

    def __init__(self, message, k=None):
        super().__init__(message)
        self.k = k


class DegenerateBandError(NumericalError):
    """Band is degenerate where a simple eigenvalue is required."""


class SpectralBoundError(NumericalError):
    """Chebyshev scaling interval does not enclose the spectrum."""


class ToleranceError(BandshiftError):
    """A verification tolerance was breached."""
