"""Exception and warning types shared across the package."""


class MemfloError(Exception):
    """Base class for all package-specific failures."""


class BoundViolation(MemfloError):
    """Memory transfer evaluated at or below its exponential-decay abscissa."""


class QuadratureError(MemfloError):
    """Adaptive quadrature of a sampled kernel did not converge."""


class NoConvergence(MemfloError):
    """An iterative solve ran out of iterations.

    ``trace`` holds the residual-norm history of the failed iteration.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class SingularJacobian(MemfloError):
    """Newton linear system is singular (typically near a fold point)."""


class NoCycle(MemfloError):
    """No periodic attractor was found from any seed at this parameter point."""


class SingularLeading(MemfloError):
    """Leading polynomial-eigenproblem coefficient is singular.

    Raised only when the caller refuses infinite eigenvalues; by default they
    are counted and reported alongside the finite ones.
    """


class MatchedLine(MemfloError):
    """Zero reflection coefficient: the resonator has no discrete spectrum."""


class ConfigError(MemfloError):
    """A run configuration failed schema validation."""


class SpectralResolutionWarning(UserWarning):
    """Trailing harmonic amplitudes are too large for the requested truncation."""
