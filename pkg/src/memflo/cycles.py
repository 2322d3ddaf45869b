"""Periodic steady states of nonlinear systems with memory.

The state equation is dz/dt = f(z, t) + integral K(t - tau) w(z(tau)) dtau
with a time-invariant kernel envelope and an optional state-dependent
integrand w (identity by default).  The periodic solution is sought directly
in the frequency domain: the harmonic residual

    rho = Omega_n z - F(z) - M(z)

is driven to zero by damped Newton iteration, where F collects the harmonics
of f sampled on an oversampled grid (alias-free in the retained band for
polynomial nonlinearities) and M applies the kernel transfer per harmonic to
the integrand harmonics.  For autonomous systems the fundamental frequency is
an unknown and one first-harmonic imaginary part is pinned to zero to fix the
time origin.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NoConvergence, SingularJacobian, SpectralResolutionWarning
from .floquet import FloquetProblem
from .hb import (
    HarmonicVector,
    MatrixHarmonics,
    extract_real_rows,
    pack_real_coefficients,
    real_coefficient_basis,
    stacked_diff_matrix,
    toeplitz_from_periodic,
    unpack_real_coefficients,
)
from .kernels import (
    Delay,
    ExponentialDecay,
    FiniteSupportSampled,
    KernelSpec,
    MemoryTransfer,
    ModulatedExponential,
    transfer_at,
    transfer_dlambda,
)

__all__ = [
    "SystemModel",
    "LimitCycle",
    "hb_residual",
    "solve_cycle",
    "linearize",
    "seed_from_time_integration",
    "rotate_phase",
]

log = logging.getLogger(__name__)

RESOLUTION_WARN_RATIO = 1e-8


@dataclass
class SystemModel:
    """Right-hand side, Jacobian, and memory structure of the state equation.

    ``rhs(z, t)`` and ``rhs_jacobian(z, t)`` describe the memoryless part;
    ``kernel`` (optional) the memory envelope, applied to
    ``memory_integrand(z)`` which defaults to the state itself.  Autonomous
    systems must ignore ``t`` and may leave the period to be solved for.
    With ``validate=True`` the Jacobian is checked against finite differences
    of the right-hand side on a few random states at construction.
    """

    dim: int
    rhs: Callable
    rhs_jacobian: Callable
    kernel: KernelSpec | None = None
    memory_integrand: Callable | None = None
    memory_integrand_jacobian: Callable | None = None
    autonomous: bool = False
    period_hint: float | None = None
    validate: bool = False

    def __post_init__(self):
        if (self.memory_integrand is None) != (self.memory_integrand_jacobian is None):
            raise ValueError("memory integrand and its jacobian must come together")
        if self.memory_integrand is not None and not isinstance(
                self.kernel, (ExponentialDecay,)):
            raise ValueError("state-dependent integrands need an exponential envelope")
        if self.validate:
            self._check_jacobian()

    def _check_jacobian(self, n_checks: int = 3, tol: float = 1e-5):
        rng = np.random.default_rng(0)
        for _ in range(n_checks):
            z = rng.normal(size=self.dim)
            t = float(rng.uniform(0, 1))
            jac = np.atleast_2d(np.asarray(self.rhs_jacobian(z, t), dtype=float))
            fd = np.empty_like(jac)
            h = 1e-6
            for j in range(self.dim):
                dz = np.zeros(self.dim)
                dz[j] = h
                fd[:, j] = (np.asarray(self.rhs(z + dz, t)) -
                            np.asarray(self.rhs(z - dz, t))) / (2 * h)
            scale = max(1.0, float(np.max(np.abs(jac))))
            if np.max(np.abs(jac - fd)) > tol * scale:
                raise ValueError("rhs_jacobian disagrees with finite differences of rhs")

    def integrand_values(self, z: np.ndarray) -> np.ndarray:
        if self.memory_integrand is None:
            return z
        return np.asarray(self.memory_integrand(z))

    def integrand_jacobian_values(self, z: np.ndarray) -> np.ndarray:
        if self.memory_integrand_jacobian is None:
            return np.eye(self.dim)
        return np.atleast_2d(np.asarray(self.memory_integrand_jacobian(z)))


@dataclass
class LimitCycle:
    """Converged periodic steady state in harmonic form."""

    period: float
    harmonics: HarmonicVector
    residual: float
    phase_anchor: int | None = None

    @property
    def omega0(self) -> float:
        return 2 * np.pi / self.period

    def amplitude_profile(self) -> np.ndarray:
        """Max amplitude magnitude per |harmonic|, useful for resolution checks."""
        a = np.abs(self.harmonics.amplitudes)
        n = self.harmonics.n_harmonics
        return np.array([max(a[:, n + h].max(), a[:, n - h].max()) for h in range(n + 1)])


def rotate_phase(hv: HarmonicVector, phi: float) -> HarmonicVector:
    """Shift the time origin: a_h -> a_h * exp(i h phi)."""
    factors = np.exp(1j * hv.harmonics * phi)
    return HarmonicVector(hv.dim, hv.n_harmonics, hv.amplitudes * factors, hv.omega0,
                          real_signal=hv.real_signal)


def _oversampled_grid(n_harmonics: int, period: float):
    g = 2 * (2 * n_harmonics) + 1
    times = period * np.arange(1, g + 1) / g
    return g, times


def _dense_eval(amps: np.ndarray, n_harmonics: int, omega0: float,
                times: np.ndarray) -> np.ndarray:
    h = np.arange(-n_harmonics, n_harmonics + 1)
    return amps @ np.exp(1j * omega0 * np.outer(h, times))


def _grid_harmonics(values: np.ndarray, n_keep: int) -> np.ndarray:
    """Forward coefficients -n_keep..n_keep of samples on the g-point grid."""
    g = values.shape[-1]
    k = np.arange(1, g + 1)
    h = np.arange(-n_keep, n_keep + 1)
    basis = np.exp(-2j * np.pi * np.outer(h, k) / g) / g
    return values @ basis.T


def _memory_factors(model: SystemModel, omegas: np.ndarray):
    if model.kernel is None:
        return None
    mt = MemoryTransfer(model.kernel)
    return [transfer_at(mt, 0.0, w) for w in omegas]


def _residual_complex(model: SystemModel, amps: np.ndarray, omega0: float):
    """Harmonic residual and the sampled quantities reused by the Jacobian."""
    n = model.dim
    nh = (amps.shape[1] - 1) // 2
    period = 2 * np.pi / omega0
    g, times = _oversampled_grid(nh, period)
    z_samples = _dense_eval(amps, nh, omega0, times)
    z_real = z_samples.real  # conjugate-symmetric amplitudes guarantee real samples
    f_samples = np.empty((n, g))
    for i, t in enumerate(times):
        f_samples[:, i] = np.asarray(model.rhs(z_real[:, i], t), dtype=float)
    f_tilde = _grid_harmonics(f_samples, nh)

    omegas = np.arange(-nh, nh + 1) * omega0
    h = np.arange(-nh, nh + 1)
    rho = (1j * h * omega0) * amps - f_tilde

    w_tilde = None
    factors = _memory_factors(model, omegas)
    if factors is not None:
        if model.memory_integrand is None:
            w_tilde = amps
        else:
            w_samples = np.empty((n, g))
            for i in range(g):
                w_samples[:, i] = model.integrand_values(z_real[:, i])
            w_tilde = _grid_harmonics(w_samples, nh)
        for j in range(2 * nh + 1):
            rho[:, j] -= factors[j] @ w_tilde[:, j]
    return rho, z_real, times, factors, w_tilde


def hb_residual(model: SystemModel, cycle: LimitCycle) -> np.ndarray:
    """Packed real harmonic-balance residual of a candidate cycle."""
    rho, *_ = _residual_complex(model, cycle.harmonics.amplitudes, cycle.omega0)
    return pack_real_coefficients(rho)


def _jacobian_complex(model: SystemModel, amps: np.ndarray, omega0: float,
                      z_real: np.ndarray, times: np.ndarray, factors) -> np.ndarray:
    n = model.dim
    nh = (amps.shape[1] - 1) // 2
    g = z_real.shape[1]
    period = 2 * np.pi / omega0

    a_samples = np.empty((n, n, g))
    for i in range(g):
        a_samples[:, :, i] = np.atleast_2d(model.rhs_jacobian(z_real[:, i], times[i]))
    a_mh = MatrixHarmonics.from_time_grid(a_samples, period, 2 * nh)
    jac = stacked_diff_matrix(n, nh, omega0) \
        - toeplitz_from_periodic(a_mh, n_harmonics=nh).matrix()

    if factors is not None:
        if model.memory_integrand is None:
            jw_top = np.eye(n * (2 * nh + 1), dtype=complex)
        else:
            jw_samples = np.empty((n, n, g))
            for i in range(g):
                jw_samples[:, :, i] = model.integrand_jacobian_values(z_real[:, i])
            jw_mh = MatrixHarmonics.from_time_grid(jw_samples, period, 2 * nh)
            jw_top = toeplitz_from_periodic(jw_mh, n_harmonics=nh).matrix()
        m = 2 * nh + 1
        mem = np.zeros((n * m, n * m), dtype=complex)
        for j in range(m):
            rows = np.arange(n) * m + j
            mem[rows, :] = factors[j] @ jw_top[rows, :]
        jac = jac - mem
    return jac


def _omega_derivative(model: SystemModel, amps: np.ndarray, omega0: float,
                      factors, w_tilde) -> np.ndarray:
    """d(residual)/d(omega0) for autonomous problems (no explicit t in rhs)."""
    nh = (amps.shape[1] - 1) // 2
    h = np.arange(-nh, nh + 1)
    d = (1j * h) * amps
    if factors is not None:
        mt = MemoryTransfer(model.kernel)
        omegas = h * omega0
        for j in range(2 * nh + 1):
            dfac = 1j * h[j] * transfer_dlambda(mt, 0.0, omegas[j])
            d[:, j] -= dfac @ w_tilde[:, j]
    return d


def solve_cycle(model: SystemModel, initial_guess: LimitCycle, tol: float = 1e-10,
                max_iter: int = 60, max_halvings: int = 20,
                anchor: int | None = None) -> LimitCycle:
    """Damped Newton iteration on the harmonic-balance residual.

    For autonomous models the fundamental frequency joins the unknowns and
    the phase condition Im a_{anchor,1} = 0 closes the system; the anchor
    defaults to the component with the largest first-harmonic magnitude in
    the seed.  Raises :class:`NoConvergence` with the residual trace when the
    iteration stalls and :class:`SingularJacobian` when the Newton system is
    singular.
    """
    n = model.dim
    hv = initial_guess.harmonics
    nh = hv.n_harmonics
    if hv.dim != n:
        raise ValueError("guess dimension does not match the model")
    omega0 = 2 * np.pi / initial_guess.period

    if anchor is None:
        first = np.abs(hv.amplitudes[:, nh + 1]) if nh >= 1 else np.zeros(n)
        anchor = int(np.argmax(first))
    if model.autonomous and nh >= 1:
        pivot = hv.amplitudes[anchor, nh + 1]
        if abs(pivot) > 0:
            hv = rotate_phase(hv, -np.angle(pivot))

    amps = np.array(hv.amplitudes)
    u = pack_real_coefficients(amps)
    basis = real_coefficient_basis(n, nh)
    m = 2 * nh + 1
    anchor_slot = anchor * m + 2  # packed index of Im a_{anchor,1}

    def full_residual(uvec, w0):
        a = unpack_real_coefficients(uvec, n, nh)
        rho, z_real, times, factors, w_tilde = _residual_complex(model, a, w0)
        rr = pack_real_coefficients(rho)
        if model.autonomous:
            rr = np.concatenate([rr, [a[anchor, nh + 1].imag]])
        return rr, (a, rho, z_real, times, factors, w_tilde)

    trace = []
    rr, ctx = full_residual(u, omega0)
    norm = float(np.linalg.norm(rr))
    trace.append(norm)
    for _ in range(max_iter):
        if norm < tol:
            break
        a, rho, z_real, times, factors, w_tilde = ctx
        jc = _jacobian_complex(model, a, omega0, z_real, times, factors)
        jr = extract_real_rows(jc @ basis, n, nh)
        if model.autonomous:
            dw = extract_real_rows(
                _omega_derivative(model, a, omega0, factors, w_tilde).reshape(-1), n, nh)
            jr = np.block([[jr, dw[:, None]],
                           [np.zeros((1, jr.shape[1] + 1))]])
            jr[-1, anchor_slot] = 1.0
        try:
            delta = np.linalg.solve(jr, -rr)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(str(exc)) from exc

        step = 1.0
        accepted = False
        for _ in range(max_halvings):
            u_new = u + step * delta[:n * m]
            w_new = omega0 + step * delta[n * m] if model.autonomous else omega0
            if w_new <= 0:
                step *= 0.5
                continue
            rr_new, ctx_new = full_residual(u_new, w_new)
            norm_new = float(np.linalg.norm(rr_new))
            if norm_new < norm:
                u, omega0, rr, ctx, norm = u_new, w_new, rr_new, ctx_new, norm_new
                accepted = True
                break
            step *= 0.5
        trace.append(norm)
        if not accepted:
            raise NoConvergence("cycle Newton stalled (no decreasing step)", trace)
    else:
        raise NoConvergence("cycle Newton did not reach tolerance", trace)

    amps = unpack_real_coefficients(u, n, nh)
    result = HarmonicVector(n, nh, amps, omega0, real_signal=True)
    _warn_if_underresolved(result)
    return LimitCycle(2 * np.pi / omega0, result, norm, phase_anchor=anchor)


def _warn_if_underresolved(hv: HarmonicVector):
    n = hv.n_harmonics
    if n < 2:
        return
    a = np.abs(hv.amplitudes)
    peak = a.max()
    if peak < 1e-12:  # numerically zero state, nothing to resolve
        return
    edge = max(a[:, 0].max(), a[:, -1].max())
    if edge > RESOLUTION_WARN_RATIO * peak:
        warnings.warn(
            f"trailing harmonic amplitude {edge:.2e} exceeds {RESOLUTION_WARN_RATIO:.0e}"
            f" of the peak {peak:.2e}; increase the truncation",
            SpectralResolutionWarning, stacklevel=2)


def linearize(model: SystemModel, cycle: LimitCycle) -> FloquetProblem:
    """Variational problem about a converged cycle.

    The memoryless Jacobian sampled along the cycle becomes the Toeplitz
    operator; a state-dependent memory integrand linearizes into a
    periodically modulated exponential kernel.
    """
    n = model.dim
    nh = cycle.harmonics.n_harmonics
    omega0 = cycle.omega0
    _, times = _oversampled_grid(nh, cycle.period)
    z_real = _dense_eval(cycle.harmonics.amplitudes, nh, omega0, times).real
    g = len(times)

    a_samples = np.empty((n, n, g))
    for i in range(g):
        a_samples[:, :, i] = np.atleast_2d(model.rhs_jacobian(z_real[:, i], times[i]))
    a_mh = MatrixHarmonics.from_time_grid(a_samples, cycle.period, 2 * nh)
    jac = toeplitz_from_periodic(a_mh, n_harmonics=nh)

    transfer = None
    if model.kernel is not None:
        if model.memory_integrand is None:
            transfer = MemoryTransfer(model.kernel)
        else:
            env = model.kernel
            b_samples = np.empty((n, n, g))
            for i in range(g):
                b_samples[:, :, i] = env.coefficient @ model.integrand_jacobian_values(
                    z_real[:, i])
            profile = MatrixHarmonics.from_time_grid(b_samples, cycle.period, 2 * nh)
            transfer = MemoryTransfer(ModulatedExponential(profile, env.rate))
    return FloquetProblem(jac, transfer, cycle.period, nh, n)


# --- coarse time-domain seeding ----------------------------------------------


def seed_from_time_integration(model: SystemModel, n_harmonics: int, z0,
                               period_estimate: float | None = None,
                               n_periods: int = 10, n_steps: int = 2000) -> LimitCycle:
    """Initial cycle guess from fixed-step integration of the transient.

    Marches RK4 with the memory integral evaluated by trapezoid quadrature
    over a finite history window (five decay times for exponential
    envelopes), estimates the period from late upcrossings, and transforms
    the last period to harmonic form.
    """
    t_guess = period_estimate or model.period_hint
    if t_guess is None:
        raise ValueError("need a period estimate to seed from time integration")
    z0 = np.asarray(z0, dtype=float)
    t_end = n_periods * t_guess
    h = t_end / n_steps
    kern = model.kernel
    if kern is None:
        window_steps = 0
    elif isinstance(kern, ExponentialDecay):
        window_steps = int(math.ceil(5.0 / kern.rate / h))
    elif isinstance(kern, Delay):
        window_steps = int(math.ceil(kern.delay / h)) + 1
    elif isinstance(kern, FiniteSupportSampled):
        window_steps = int(math.ceil(kern.support / h))
    else:
        raise ValueError("unsupported kernel for time-domain seeding")

    times = np.arange(n_steps + 1) * h
    hist_z = np.zeros((model.dim, n_steps + 1))
    hist_w = np.zeros((model.dim, n_steps + 1))
    hist_z[:, 0] = z0
    hist_w[:, 0] = model.integrand_values(z0)

    def memory_value(i):
        if kern is None or i == 0:
            return np.zeros(model.dim)
        lo = max(0, i - window_steps)
        taus = times[lo:i + 1]
        vals = hist_w[:, lo:i + 1]
        if isinstance(kern, ExponentialDecay):
            weights = np.exp(-kern.rate * (times[i] - taus))
            integ = np.trapezoid(vals * weights, taus, axis=1)
            return kern.coefficient @ integ
        if isinstance(kern, Delay):
            t_past = times[i] - kern.delay
            if t_past < 0:
                return np.zeros(model.dim)
            cols = np.empty(model.dim)
            for c in range(model.dim):
                cols[c] = np.interp(t_past, taus, vals[c])
            return kern.weight @ cols
        values = kern.values[0]  # time-invariant sampled envelope
        u_grid = kern.u_grid
        u = times[i] - taus
        mask = u <= kern.support
        acc = np.zeros(model.dim)
        if mask.any():
            kmat = np.empty((mask.sum(), model.dim, model.dim))
            for a in range(model.dim):
                for b in range(model.dim):
                    kmat[:, a, b] = np.interp(u[mask], u_grid, values[:, a, b])
            prod = np.einsum("gab,bg->ag", kmat, vals[:, mask])
            acc = np.trapezoid(prod, taus[mask], axis=1)
        return acc

    z = z0.copy()
    for i in range(n_steps):
        mem = memory_value(i)
        t = times[i]

        def f(zz, tt):
            return np.asarray(model.rhs(zz, tt), dtype=float) + mem

        k1 = f(z, t)
        k2 = f(z + 0.5 * h * k1, t + 0.5 * h)
        k3 = f(z + 0.5 * h * k2, t + 0.5 * h)
        k4 = f(z + h * k3, t + h)
        z = z + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        hist_z[:, i + 1] = z
        hist_w[:, i + 1] = model.integrand_values(z)

    period = _estimate_period(times, hist_z, t_guess) if model.autonomous else t_guess
    m = 2 * n_harmonics + 1
    sample_t = t_end - period + period * np.arange(1, m + 1) / m
    amps_samples = np.empty((model.dim, m))
    for c in range(model.dim):
        amps_samples[c] = np.interp(sample_t, times, hist_z[c])
    k = np.arange(1, m + 1)
    hgrid = np.arange(-n_harmonics, n_harmonics + 1)
    basis = np.exp(-2j * np.pi * np.outer(hgrid, k) / m) / m
    amps = amps_samples @ basis.T
    hv = HarmonicVector(model.dim, n_harmonics, amps, 2 * np.pi / period, real_signal=False)
    return LimitCycle(period, hv, math.inf, phase_anchor=None)


def _estimate_period(times: np.ndarray, hist: np.ndarray, fallback: float) -> float:
    tail = times >= times[-1] - 4 * fallback
    t = times[tail]
    best = None
    for c in range(hist.shape[0]):
        x = hist[c, tail]
        x = x - x.mean()
        if np.ptp(x) < 1e-12:
            continue
        ups = np.nonzero((x[:-1] < 0) & (x[1:] >= 0))[0]
        if len(ups) < 3:
            continue
        crossings = t[ups] - x[ups] * (t[ups + 1] - t[ups]) / (x[ups + 1] - x[ups])
        gaps = np.diff(crossings)
        est = float(np.median(gaps))
        if best is None or abs(est - fallback) < abs(best - fallback):
            best = est
    return best if best is not None else fallback
