"""Floquet stability of periodic states in dynamical systems with memory.

The package computes Floquet exponents, multipliers, and eigenvectors of
limit cycles governed by integro-differential equations with linear memory
kernels.  Everything runs in the frequency domain: periodic signals are
truncated Fourier series, the variational problem becomes a transcendental
eigenproblem in the exponent, and polynomial reductions of it are solved by
companion linearization and polished by Newton iteration.
"""

from .cycles import LimitCycle, SystemModel, hb_residual, linearize, solve_cycle
from .errors import (
    BoundViolation,
    ConfigError,
    MatchedLine,
    MemfloError,
    NoConvergence,
    NoCycle,
    QuadratureError,
    SingularJacobian,
    SingularLeading,
    SpectralResolutionWarning,
)
from .floquet import (
    FloquetEigenpair,
    FloquetProblem,
    FloquetSpectrum,
    assemble_residual_matrix,
    canonicalize_spectrum,
    cleared_pep,
    floquet_spectrum,
    refine_eigenpair,
    solve_pep,
    solve_scalar,
    splitting_shift,
    taylor_pep,
)
from .hb import (
    DftOperator,
    DiffOperator,
    HarmonicVector,
    MatrixHarmonics,
    TimeSamples,
    ToeplitzMatrix,
    dft,
    differentiate,
    idft,
    toeplitz_from_periodic,
)
from .kernels import (
    Delay,
    ExponentialDecay,
    FiniteSupportSampled,
    KernelSpec,
    MemoryTransfer,
    ModulatedExponential,
    critical_exponent,
    transfer_at,
    truncation_error_bound,
)
from .models import (
    BrownianParticleModel,
    Memory1DModel,
    TlResonatorModel,
    model1d_convergence,
    model1d_exponent,
    particle_effective_friction,
    particle_equilibrium_spectrum,
    particle_spectrum,
    tl_spectrum,
)

__version__ = "0.1.0"
