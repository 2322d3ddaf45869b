"""Case-study models wired into the solver stack.

Three systems exercise the machinery end to end: a scalar linear rate
equation with an exponentially fading memory, a planar self-propelled
particle whose friction retardation is an exponential kernel of the velocity,
and a resonator closed by an ideal delay line whose spectrum is available in
closed form.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .cycles import (
    LimitCycle,
    SystemModel,
    linearize,
    seed_from_time_integration,
    solve_cycle,
)
from .errors import MatchedLine, NoConvergence, NoCycle, SingularJacobian
from .floquet import (
    FloquetEigenpair,
    FloquetProblem,
    FloquetSpectrum,
    canonicalize_spectrum,
    floquet_spectrum,
    make_eigenpair,
    solve_scalar,
)
from .hb import HarmonicVector, MatrixHarmonics, differentiate, toeplitz_from_periodic
from .kernels import ExponentialDecay, MemoryTransfer

CYCLE_AMPLITUDE_TOL = 1e-6  # oscillation smaller than this counts as the rest state

__all__ = [
    "Memory1DModel",
    "BrownianParticleModel",
    "TlResonatorModel",
    "model1d_problem",
    "model1d_exponent",
    "model1d_asymptotic_exponent",
    "model1d_convergence",
    "particle_spectrum",
    "particle_equilibrium_spectrum",
    "particle_effective_friction",
    "tl_spectrum",
    "cycle_amplitude",
    "CYCLE_AMPLITUDE_TOL",
]


# --- 1-D memory system -------------------------------------------------------


@dataclass(frozen=True)
class Memory1DModel:
    """dy/dt = a*y + integral over the last s time units of e^{-k(t-tau)} y(tau)."""

    a: float
    k: float
    s: float = math.inf

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("decay rate k must be positive")
        if self.s < 0:
            raise ValueError("memory length must be nonnegative")


def model1d_problem(m: Memory1DModel, n_harmonics: int = 0,
                    period: float = 2 * math.pi) -> FloquetProblem:
    omega0 = 2 * math.pi / period
    jac = toeplitz_from_periodic(
        MatrixHarmonics.constant([[m.a]], omega0), n_harmonics=n_harmonics)
    truncation = None if math.isinf(m.s) else m.s
    transfer = MemoryTransfer(ExponentialDecay([[1.0]], m.k), truncation=truncation)
    return FloquetProblem(jac, transfer, period, n_harmonics, 1)


def model1d_exponent(m: Memory1DModel, n_harmonics: int = 0,
                     period: float = 2 * math.pi, **solver_kwargs) -> FloquetSpectrum:
    """Exponent classes of the scalar memory model via direct root hunting."""
    return solve_scalar(model1d_problem(m, n_harmonics, period), **solver_kwargs)


def model1d_asymptotic_exponent(m: Memory1DModel) -> float:
    """Infinite-memory exponent: clearing the denominator of the scalar
    characteristic equation gives lambda^2 + (k-a) lambda - (a k + 1) = 0 and
    only the root above -k is admissible."""
    a, k = m.a, m.k
    return ((a - k) + math.sqrt((k + a) ** 2 + 4.0)) / 2.0


def model1d_convergence(m: Memory1DModel, s_values) -> list[tuple[float, complex, float]]:
    """Table of (s, lambda(s), |lambda(s) - lambda_inf|) over memory lengths."""
    lam_inf = model1d_asymptotic_exponent(m)
    out = []
    for s in s_values:
        if s < 0:
            raise ValueError("memory lengths must be nonnegative")
        spec = model1d_exponent(Memory1DModel(m.a, m.k, float(s)))
        lam = max((p.exponent for p in spec.canonical_strip), key=lambda z: z.real)
        out.append((float(s), lam, abs(lam - lam_inf)))
    return out


# --- planar particle with friction memory ------------------------------------


@dataclass(frozen=True)
class BrownianParticleModel:
    """Planar particle in an anisotropic harmonic well with retarded friction.

    The friction coefficient gamma(v) = -alpha + beta*|v|^2 + g/k acts through
    an exponential retardation of rate k (the inverse correlation time);
    letting k -> inf recovers the instantaneous (memoryless) friction.
    """

    alpha: float
    beta: float
    g: float
    k: float
    omega_bar: tuple[float, float] = (2.0, 2.0)
    mass: float = 1.0

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("inverse correlation time k must be positive")
        if self.omega_bar[0] <= 0 or self.omega_bar[1] <= 0:
            raise ValueError("well frequencies must be positive")
        if self.mass <= 0:
            raise ValueError("mass must be positive")

    def friction(self, v: np.ndarray) -> float:
        return -self.alpha + self.beta * float(v @ v) + self.g / self.k

    def friction_memoryless(self, v: np.ndarray) -> float:
        return -self.alpha + self.beta * float(v @ v)


def _particle_system(m: BrownianParticleModel, memoryless: bool = False) -> SystemModel:
    w2 = np.array([m.omega_bar[0] ** 2, m.omega_bar[1] ** 2])

    if memoryless:
        def rhs(z, t):
            x, v = z[:2], z[2:]
            gam = m.friction_memoryless(v)
            return np.concatenate([v, -gam * v - w2 * x])

        def jac(z, t):
            v = z[2:]
            gam = m.friction_memoryless(v)
            out = np.zeros((4, 4))
            out[0, 2] = out[1, 3] = 1.0
            out[2:, :2] = -np.diag(w2)
            out[2:, 2:] = -(gam * np.eye(2) + 2 * m.beta * np.outer(v, v))
            return out

        return SystemModel(4, rhs, jac, autonomous=True,
                           period_hint=2 * math.pi / m.omega_bar[0])

    def rhs(z, t):
        x, v = z[:2], z[2:]
        return np.concatenate([v, -w2 * x])

    def jac(z, t):
        out = np.zeros((4, 4))
        out[0, 2] = out[1, 3] = 1.0
        out[2:, :2] = -np.diag(w2)
        return out

    def integrand(z):
        v = z[2:]
        return np.concatenate([np.zeros(2), -m.k * m.friction(v) * v])

    def integrand_jac(z):
        v = z[2:]
        out = np.zeros((4, 4))
        out[2:, 2:] = -m.k * (m.friction(v) * np.eye(2) + 2 * m.beta * np.outer(v, v))
        return out

    kernel = ExponentialDecay(np.eye(4), m.k)
    return SystemModel(4, rhs, jac, kernel=kernel, memory_integrand=integrand,
                       memory_integrand_jacobian=integrand_jac, autonomous=True,
                       period_hint=2 * math.pi / m.omega_bar[0])


def particle_system(m: BrownianParticleModel, memoryless: bool = False) -> SystemModel:
    """State-space form of the particle equations (4-D: position then velocity)."""
    return _particle_system(m, memoryless)


def circular_cycle_guess(m: BrownianParticleModel, n_harmonics: int,
                         memoryless: bool = False) -> LimitCycle | None:
    """Rotating-orbit seed; exact when the well is isotropic.

    On a circular orbit the speed is constant, so the friction coefficient
    vanishes on radius R = sqrt((alpha - g/k)/beta)/omega and the orbit closes
    at the well frequency regardless of the retardation.
    """
    shift = 0.0 if memoryless else m.g / m.k
    r2 = (m.alpha - shift) / m.beta if m.beta != 0 else -1.0
    if r2 <= 0:
        return None
    omega = m.omega_bar[0]
    radius = math.sqrt(r2) / omega
    nh = n_harmonics
    amps = np.zeros((4, 2 * nh + 1), dtype=complex)
    amps[0, nh + 1] = radius / 2
    amps[0, nh - 1] = radius / 2
    amps[1, nh + 1] = radius / (2j)
    amps[1, nh - 1] = (radius / (2j)).conjugate()
    pos = HarmonicVector(2, nh, amps[:2], omega, real_signal=True)
    vel = differentiate(pos)
    amps[2:] = vel.amplitudes
    hv = HarmonicVector(4, nh, amps, omega, real_signal=True)
    return LimitCycle(2 * math.pi / omega, hv, math.inf)


def particle_effective_friction(m: BrownianParticleModel, c: LimitCycle) -> MatrixHarmonics:
    """Harmonics of the velocity Jacobian of the friction force along a cycle.

    The friction force density gamma(|v|) v linearizes to
    gamma(|v|) I + 2 beta v v^T evaluated on the cycle velocity; the
    harmonics of that 2x2 matrix drive the velocity-velocity coupling of the
    variational problem.
    """
    nh = c.harmonics.n_harmonics
    g = 2 * (2 * nh) + 1
    times = c.period * np.arange(1, g + 1) / g
    z = c.harmonics.evaluate(times).real
    samples = np.empty((2, 2, g))
    for i in range(g):
        v = z[2:, i]
        samples[:, :, i] = m.friction(v) * np.eye(2) + 2 * m.beta * np.outer(v, v)
    return MatrixHarmonics.from_time_grid(samples, c.period, 2 * nh)


def particle_equilibrium_spectrum(m: BrownianParticleModel,
                                  period: float | None = None) -> FloquetSpectrum:
    """Exponents of the resting state at the origin.

    The linearization is time invariant, so the eigenproblem reduces to its
    zero-harmonic block and the exponents are plain constants (no splitting
    classes, no strip folding).
    """
    period = period or 2 * math.pi / m.omega_bar[0]
    omega0 = 2 * math.pi / period
    a = np.zeros((4, 4))
    a[0, 2] = a[1, 3] = 1.0
    a[2:, :2] = -np.diag([m.omega_bar[0] ** 2, m.omega_bar[1] ** 2])
    jac = toeplitz_from_periodic(MatrixHarmonics.constant(a, omega0), n_harmonics=0)
    gamma0 = m.friction(np.zeros(2))
    c = np.zeros((4, 4))
    c[2:, 2:] = -m.k * gamma0 * np.eye(2)
    transfer = MemoryTransfer(ExponentialDecay(c, m.k))
    problem = FloquetProblem(jac, transfer, period, 0, 4)
    return floquet_spectrum(problem, autonomous=False, strip_reduce=False)


def particle_spectrum(m: BrownianParticleModel, n_harmonics: int = 30,
                      seed: LimitCycle | None = None,
                      memoryless: bool = False) -> tuple[LimitCycle, FloquetSpectrum]:
    """Limit cycle and its exponent classes for the particle model.

    Tries the analytic rotating seed first, then a coarse time-integration
    seed.  When no cycle converges and the resting state is stable the
    degenerate zero cycle is returned with the equilibrium spectrum;
    otherwise :class:`NoCycle` is raised (non-periodic attractor regime).
    """
    system = _particle_system(m, memoryless)
    seeds = []
    if seed is not None:
        seeds.append(seed)
    guess = circular_cycle_guess(m, n_harmonics, memoryless)
    if guess is not None:
        seeds.append(guess)

    cycle = None
    for candidate in seeds:
        try:
            cycle = solve_cycle(system, candidate)
        except (NoConvergence, SingularJacobian):
            continue
        if cycle_amplitude(cycle) > CYCLE_AMPLITUDE_TOL:
            break
        cycle = None
    if cycle is None:
        try:
            late = seed_from_time_integration(
                system, n_harmonics, z0=np.array([0.3, 0.0, 0.0, 0.5]),
                period_estimate=2 * math.pi / m.omega_bar[0])
            attempt = solve_cycle(system, late)
            if cycle_amplitude(attempt) > CYCLE_AMPLITUDE_TOL:
                cycle = attempt
        except (NoConvergence, SingularJacobian, ValueError):
            cycle = None

    if cycle is None:
        eq = particle_equilibrium_spectrum(m) if not memoryless \
            else _memoryless_equilibrium_spectrum(m)
        if eq.stability != "Unstable":
            zero = LimitCycle(2 * math.pi / m.omega_bar[0],
                              HarmonicVector(4, n_harmonics,
                                             np.zeros((4, 2 * n_harmonics + 1)),
                                             m.omega_bar[0], real_signal=True),
                              0.0)
            return zero, eq
        raise NoCycle("no periodic attractor found and the resting state is unstable")

    problem = linearize(system, cycle)
    spectrum = floquet_spectrum(problem, autonomous=True)
    return cycle, spectrum


def _memoryless_equilibrium_spectrum(m: BrownianParticleModel) -> FloquetSpectrum:
    period = 2 * math.pi / m.omega_bar[0]
    a = np.zeros((4, 4))
    a[0, 2] = a[1, 3] = 1.0
    a[2:, :2] = -np.diag([m.omega_bar[0] ** 2, m.omega_bar[1] ** 2])
    a[2:, 2:] = -m.friction_memoryless(np.zeros(2)) * np.eye(2)
    vals, vecs = np.linalg.eig(a)
    omega0 = 2 * math.pi / period
    jac = toeplitz_from_periodic(MatrixHarmonics.constant(a, omega0), n_harmonics=0)
    problem = FloquetProblem(jac, None, period, 0, 4)
    pairs = [make_eigenpair(problem, complex(v), vecs[:, i], 0.0)
             for i, v in enumerate(vals)]
    worst = max(p.exponent.real for p in pairs)
    verdict = ("Unstable" if worst > 1e-6 else
               "Marginal" if abs(worst) <= 1e-6 else "Stable")
    return FloquetSpectrum(pairs, pairs, verdict, period)


def cycle_amplitude(cycle: LimitCycle) -> float:
    """Largest oscillating amplitude (the constant offset does not count)."""
    a = np.abs(cycle.harmonics.amplitudes).copy()
    a[:, cycle.harmonics.n_harmonics] = 0.0
    return float(a.max())


# --- delay-line resonator -----------------------------------------------------


@dataclass(frozen=True)
class TlResonatorModel:
    """Series resistances R + Ra terminating a shorted ideal line.

    ``tau_f`` is the one-way propagation delay and ``Z0`` the characteristic
    impedance; the active element may present a negative resistance.
    """

    R: float
    Ra: float
    Z0: float = 1.0
    tau_f: float = 1.0

    def __post_init__(self):
        if self.R < 0:
            raise ValueError("loss resistance must be nonnegative")
        if self.Z0 <= 0:
            raise ValueError("characteristic impedance must be positive")
        if self.tau_f <= 0:
            raise ValueError("line delay must be positive")

    @property
    def reflection_coefficient(self) -> float:
        """Termination reflection against the line impedance."""
        y0 = 1.0 / self.Z0
        den = (self.R + self.Ra) * y0 + 1.0
        if abs(den) < 1e-14:
            raise ValueError("termination sits on the reflection pole")
        return ((self.R + self.Ra) * y0 - 1.0) / den


def tl_spectrum(m: TlResonatorModel, n_roots: int = 5) -> FloquetSpectrum:
    """Closed-form resonance exponents of the delay-line resonator.

    A round trip multiplies a wave by -Gamma0*exp(-2*lambda*tau_f); the
    spectrum solves exp(2*lambda*tau_f) = -Gamma0, so the ``n_roots``
    exponents k = 0..n_roots-1 share the real part ln|Gamma0|/(2*tau_f) and
    are spaced by i*pi/tau_f.  They all present the same round-trip
    multiplier -Gamma0, so they form a single class.
    """
    gamma0 = m.reflection_coefficient
    if abs(gamma0) < 1e-15:
        raise MatchedLine("matched termination: every reflection vanishes")
    period = 2 * m.tau_f
    omega0 = 2 * math.pi / period
    base = cmath.log(-gamma0 if gamma0 != 0 else 0)  # principal branch
    pairs = []
    for k in range(n_roots):
        lam = (base + 2j * math.pi * k) / (2 * m.tau_f)
        vec = HarmonicVector(1, 0, np.array([[1.0 + 0j]]), omega0)
        residual = abs(cmath.exp(2 * lam * m.tau_f) + gamma0)
        mult = cmath.exp(lam * period)
        pairs.append(FloquetEigenpair(lam, mult, vec, residual))
    return canonicalize_spectrum(pairs, omega0, period=period,
                                 diagnostics={"reflection_coefficient": gamma0})
