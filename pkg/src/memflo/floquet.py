"""Floquet exponents of periodic states with linear memory.

The characteristic operator on the harmonic layout is

    R(lambda) = Omega_n + lambda*I - A_toeplitz - Q(lambda),

whose null pairs (lambda, r) are the Floquet exponents and eigenvector
harmonics.  Q(lambda) is the memory coupling of :mod:`memflo.kernels`.  Three
solution routes are provided: direct scalar root hunting (1-D problems), an
exact quadratic polynomial eigenproblem obtained by clearing the rational
denominators of exponential-family kernels, and a Taylor-series polynomial
approximation for everything else.  Polynomial eigenproblems are linearized
in first companion form and solved densely; raw eigenvalues are filtered
against the kernel decay bound, polished by bordered Newton iteration on the
exact transcendental operator, and collapsed into splitting classes (each
exponent class is invariant under shifts by i*omega0; multipliers
exp(lambda*T) label the classes uniquely).
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .errors import BoundViolation, NoConvergence, SingularLeading
from .hb import HarmonicVector, ToeplitzMatrix, stacked_diff_matrix
from .kernels import (
    ExponentialDecay,
    MemoryTransfer,
    ModulatedExponential,
    critical_exponent,
    memory_matrix,
    memory_matrix_dlambda,
    memory_taylor_matrices,
    transfer_at,
    transfer_dlambda,
)

__all__ = [
    "FloquetProblem",
    "FloquetEigenpair",
    "FloquetSpectrum",
    "PepResult",
    "assemble_residual_matrix",
    "residual_matrix_dlambda",
    "eigenpair_residual",
    "solve_scalar",
    "taylor_pep",
    "cleared_pep",
    "solve_pep",
    "refine_eigenpair",
    "canonicalize_spectrum",
    "floquet_spectrum",
    "splitting_shift",
    "shift_harmonics",
]

log = logging.getLogger(__name__)

STABILITY_TOL = 1e-6
MERGE_TOL = 1e-8
TRIVIAL_FACTOR = 1e-3
CERTIFICATE_TOL = 1e-8
BOUND_MARGIN = 1e-9


@dataclass(frozen=True)
class FloquetProblem:
    """Assembled ingredients of the harmonic eigenproblem."""

    jacobian: ToeplitzMatrix
    transfer: MemoryTransfer | None
    period: float
    n_harmonics: int
    dim: int

    def __post_init__(self):
        if self.jacobian.dim != self.dim or self.jacobian.n_harmonics != self.n_harmonics:
            raise ValueError("jacobian layout does not match the problem")
        if self.transfer is not None and self.transfer.dim != self.dim:
            raise ValueError("kernel dimension does not match the problem")
        if self.period <= 0:
            raise ValueError("period must be positive")

    @property
    def omega0(self) -> float:
        return 2 * np.pi / self.period

    @property
    def omegas(self) -> np.ndarray:
        return np.arange(-self.n_harmonics, self.n_harmonics + 1) * self.omega0

    @property
    def size(self) -> int:
        return self.dim * (2 * self.n_harmonics + 1)

    @property
    def critical_exponent(self) -> float:
        if self.transfer is None:
            return math.inf
        return critical_exponent(self.transfer.kernel)


@dataclass
class FloquetEigenpair:
    exponent: complex
    multiplier: complex
    eigenvector: HarmonicVector | None
    residual: float
    bound_ok: bool = True
    refined: bool = True
    trivial: bool = False


@dataclass
class FloquetSpectrum:
    """Computed exponents, one canonical representative per splitting class."""

    pairs: list
    canonical_strip: list
    stability: str
    period: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def omega0(self) -> float:
        return 2 * np.pi / self.period

    @property
    def exponents(self) -> np.ndarray:
        return np.array([p.exponent for p in self.canonical_strip])

    @property
    def multipliers(self) -> np.ndarray:
        return np.array([p.multiplier for p in self.canonical_strip])

    def max_nontrivial_re(self) -> float | None:
        res = [p.exponent.real for p in self.canonical_strip if not p.trivial]
        return max(res) if res else None


def _gauge_normalize(vec: np.ndarray) -> np.ndarray:
    idx = int(np.argmax(np.abs(vec)))
    pivot = vec[idx]
    if pivot == 0:
        return vec
    return vec / pivot


def make_eigenpair(problem: FloquetProblem, exponent: complex, vector: np.ndarray,
                   residual: float, refined: bool = True) -> FloquetEigenpair:
    """Package an eigenpair: gauge-normalized vector, multiplier, bound flag."""
    vec = _gauge_normalize(np.asarray(vector, dtype=complex))
    hv = HarmonicVector.from_flat(vec, problem.dim, problem.n_harmonics, problem.omega0)
    mult = cmath.exp(exponent * problem.period)
    kc = problem.critical_exponent
    ok = (not math.isfinite(kc)) or exponent.real > -kc + BOUND_MARGIN
    return FloquetEigenpair(complex(exponent), mult, hv, float(residual),
                            bound_ok=ok, refined=refined)


def assemble_residual_matrix(p: FloquetProblem, lam: complex) -> np.ndarray:
    """R(lambda) on the component-major layout; eigenpairs satisfy R r = 0."""
    r = stacked_diff_matrix(p.dim, p.n_harmonics, p.omega0)
    r = r + complex(lam) * np.eye(p.size) - p.jacobian.matrix()
    if p.transfer is not None:
        r = r - memory_matrix(p.transfer, lam, p.omegas)
    return r


def residual_matrix_dlambda(p: FloquetProblem, lam: complex) -> np.ndarray:
    d = np.eye(p.size, dtype=complex)
    if p.transfer is not None:
        d = d - memory_matrix_dlambda(p.transfer, lam, p.omegas)
    return d


def eigenpair_residual(p: FloquetProblem, exponent: complex, vector: np.ndarray) -> float:
    vec = np.asarray(vector, dtype=complex)
    return float(np.linalg.norm(assemble_residual_matrix(p, exponent) @ vec)
                 / np.linalg.norm(vec))


def shift_harmonics(hv: HarmonicVector, m: int) -> HarmonicVector:
    """Amplitudes of r(t)*exp(i*m*omega0*t): new a_h = old a_{h-m}, zero filled."""
    a = np.zeros_like(hv.amplitudes)
    mm = 2 * hv.n_harmonics + 1
    if abs(m) >= mm:
        return HarmonicVector(hv.dim, hv.n_harmonics, a, hv.omega0)
    if m >= 0:
        a[:, m:] = hv.amplitudes[:, :mm - m]
    else:
        a[:, :mm + m] = hv.amplitudes[:, -m:]
    return HarmonicVector(hv.dim, hv.n_harmonics, a, hv.omega0)


def splitting_shift(p: FloquetProblem, pair: FloquetEigenpair,
                    steps: int = 1) -> FloquetEigenpair:
    """The same eigenspace presented at exponent + i*steps*omega0.

    Its residual measures how well the truncated operator preserves the
    exponent-shift invariance of the underlying problem.
    """
    lam = pair.exponent + 1j * steps * p.omega0
    hv = shift_harmonics(pair.eigenvector, -steps)
    res = eigenpair_residual(p, lam, hv.flat)
    return make_eigenpair(p, lam, hv.flat, res, refined=pair.refined)


# --- scalar route -----------------------------------------------------------


def _scalar_constant_coefficient(p: FloquetProblem) -> complex:
    block = p.jacobian.blocks[0, 0]
    band = block[0, :]
    if block.shape[0] > 1 and np.max(np.abs(band[1:])) > 1e-12 * (1 + abs(band[0])):
        raise ValueError("scalar root hunting expects a constant coefficient")
    return complex(block[0, 0])


def solve_scalar(p: FloquetProblem, re_max: float | None = None,
                 grid_shape: tuple[int, int] = (21, 21), rng=None,
                 newton_tol: float = 5e-14, max_iter: int = 80) -> FloquetSpectrum:
    """All exponents of a scalar constant-coefficient problem.

    Roots of the zero-harmonic characteristic equation are found by Newton
    iteration from a rectangular grid of starting points with Maehly
    deflation; the other harmonics only shift those roots by -i*j*omega0, so
    the zero-harmonic roots are already the canonical representatives.
    """
    if p.dim != 1:
        raise ValueError("solve_scalar requires a one-dimensional problem")
    a = _scalar_constant_coefficient(p)
    kc = p.critical_exponent
    omega0 = p.omega0

    if p.transfer is None:
        pair = _scalar_pair(p, a, a)
        return canonicalize_spectrum([pair], omega0, period=p.period)

    mt = p.transfer

    def g(lam: complex) -> complex:
        return lam - a - complex(transfer_at(mt, lam, 0.0)[0, 0])

    def gp(lam: complex) -> complex:
        return 1.0 - complex(transfer_dlambda(mt, lam, 0.0)[0, 0])

    re_lo = (-kc + 0.05) if math.isfinite(kc) else (a.real - 5.0)
    re_hi = re_max if re_max is not None else a.real + 2.0
    if re_hi <= re_lo:
        re_hi = re_lo + 1.0
    res = np.linspace(re_lo, re_hi, grid_shape[0])
    ims = np.linspace(-omega0 / 2, omega0 / 2, grid_shape[1])
    if rng is not None:
        res = res + rng.uniform(-1, 1, res.shape) * (res[1] - res[0]) * 0.1
        ims = ims + rng.uniform(-1, 1, ims.shape) * (ims[1] - ims[0]) * 0.1

    roots: list[complex] = []
    rejected: list[complex] = []
    for re0 in res:
        for im0 in ims:
            lam = complex(re0, im0)
            converged = False
            for _ in range(max_iter):
                try:
                    val = g(lam)
                    der = gp(lam)
                except BoundViolation:
                    break
                if val == 0:
                    converged = True
                    break
                denom = der / val - sum(1.0 / (lam - r) for r in roots)
                if denom == 0 or not np.isfinite(denom):
                    break
                step = 1.0 / denom
                lam = lam - step
                if math.isfinite(kc) and mt.truncation is None and lam.real <= -kc + 1e-8:
                    break
                if abs(step) < newton_tol * (1.0 + abs(lam)):
                    converged = True
                    break
            if not converged:
                continue
            for _ in range(3):  # plain polish on the undeflated function
                try:
                    lam = lam - g(lam) / gp(lam)
                except (BoundViolation, ZeroDivisionError):
                    break
            if any(abs(lam - r) < 1e-8 for r in roots + rejected):
                continue
            if abs(g(lam)) > 1e-9 * (1.0 + abs(lam)):
                continue
            if math.isfinite(kc) and lam.real <= -kc + BOUND_MARGIN:
                rejected.append(lam)
                log.info("discarding root %s below the decay bound %s", lam, -kc)
                continue
            roots.append(lam)

    if not roots:
        raise NoConvergence("no scalar characteristic root found from any start")
    pairs = [_scalar_pair(p, a, lam, residual=abs(g(lam))) for lam in roots]
    diag = {
        "n_raw": len(roots) + len(rejected),
        "n_bound_filtered": len(rejected),
        "bound_filtered": [[r.real, r.imag] for r in rejected],
    }
    return canonicalize_spectrum(pairs, omega0, period=p.period, diagnostics=diag)


def _scalar_pair(p: FloquetProblem, a: complex, lam: complex,
                 residual: float = 0.0) -> FloquetEigenpair:
    vec = np.zeros(p.size, dtype=complex)
    vec[p.n_harmonics] = 1.0  # zero-harmonic slot of the single component
    return make_eigenpair(p, lam, vec, residual)


# --- polynomial eigenproblem routes ----------------------------------------


def taylor_pep(p: FloquetProblem, degree: int) -> list[np.ndarray]:
    """Coefficient matrices P_0..P_degree with sum_k P_k lambda^k ~ R(lambda)."""
    if degree < 1:
        raise ValueError("degree must be at least 1")
    base = stacked_diff_matrix(p.dim, p.n_harmonics, p.omega0) - p.jacobian.matrix()
    eye = np.eye(p.size, dtype=complex)
    coeffs = [base] + [eye.copy()] + [np.zeros_like(base) for _ in range(degree - 1)]
    if p.transfer is not None:
        mem = memory_taylor_matrices(p.transfer, p.omegas, degree)
        for k in range(degree + 1):
            coeffs[k] = coeffs[k] - mem[k]
    return coeffs


def _kernel_row_mask(p: FloquetProblem) -> np.ndarray:
    """Per-component mask of rows on which the memory kernel acts."""
    k = p.transfer.kernel
    if isinstance(k, ExponentialDecay):
        return np.any(k.coefficient != 0.0, axis=1)
    prof = np.asarray(k.profile.coeffs)
    return np.any(np.abs(prof) > 0.0, axis=(1, 2))


def cleared_pep(p: FloquetProblem) -> list[np.ndarray]:
    """Exact quadratic eigenproblem for untruncated exponential-family kernels.

    Rows carrying memory are multiplied by (rate + lambda + i*omega_j), which
    turns the rational coupling into a constant block and leaves a degree-2
    polynomial; rows without memory stay degree 1.  No approximation is made.
    """
    if p.transfer is None or p.transfer.truncation is not None:
        raise ValueError("denominator clearing needs an untruncated exponential kernel")
    k = p.transfer.kernel
    if not isinstance(k, (ExponentialDecay, ModulatedExponential)):
        raise ValueError("denominator clearing needs an exponential-family kernel")
    n, m = p.dim, 2 * p.n_harmonics + 1
    size = n * m
    linear = stacked_diff_matrix(p.dim, p.n_harmonics, p.omega0) - p.jacobian.matrix()
    rate_shift = k.rate + 1j * p.omegas  # d_j = rate + i*omega_j per harmonic
    mask = _kernel_row_mask(p)

    from .hb import toeplitz_from_periodic

    profile = _constant_profile(k.coefficient, p.omega0) if isinstance(k, ExponentialDecay) \
        else k.profile
    # multiplying row-harmonic j by (rate + lambda + i*omega_j) leaves the
    # plain Toeplitz coupling of the kernel profile
    kernel_rows = toeplitz_from_periodic(profile, n_harmonics=p.n_harmonics).matrix()

    p0 = np.array(linear, dtype=complex)
    p1 = np.eye(size, dtype=complex)
    p2 = np.zeros((size, size), dtype=complex)
    for c in range(n):
        rows = slice(c * m, (c + 1) * m)
        if not mask[c]:
            continue
        d = rate_shift[:, None]
        p2[rows] = np.eye(size)[rows]
        p1[rows] = linear[rows] + d * np.eye(size)[rows]
        p0[rows] = d * linear[rows] - kernel_rows[rows]
    return [p0, p1, p2]


def _constant_profile(mat: np.ndarray, omega0: float):
    from .hb import MatrixHarmonics

    return MatrixHarmonics.constant(mat, omega0)


@dataclass
class PepResult:
    """Finite eigenpairs plus the multiplicity of eigenvalues at infinity."""

    eigenpairs: list  # (eigenvalue, vector, residual)
    n_infinite: int
    degree: int
    size: int

    @property
    def total(self) -> int:
        return len(self.eigenpairs) + self.n_infinite


def solve_pep(coeffs: list[np.ndarray], allow_infinite: bool = True) -> PepResult:
    """Solve (sum_k P_k lambda^k) v = 0 by first companion linearization.

    A degree-r problem of size m yields exactly r*m eigenvalues counting the
    infinite ones that arise from a singular leading coefficient; those are
    counted in ``n_infinite`` rather than dropped.  With
    ``allow_infinite=False`` a singular leading coefficient raises
    :class:`~memflo.errors.SingularLeading` instead.
    """
    coeffs = [np.atleast_2d(np.asarray(c, dtype=complex)) for c in coeffs]
    degree = len(coeffs) - 1
    if degree < 1:
        raise ValueError("need at least two coefficient matrices")
    msize = coeffs[0].shape[0]
    for c in coeffs:
        if c.shape != (msize, msize):
            raise ValueError("coefficient matrices must be square and same size")

    lead = coeffs[-1]
    sv = np.linalg.svd(lead, compute_uv=False)
    if not allow_infinite and sv[-1] <= max(1.0, sv[0]) * msize * np.finfo(float).eps:
        raise SingularLeading("leading coefficient is singular; infinite eigenvalues present")

    dim = degree * msize
    a = np.zeros((dim, dim), dtype=complex)
    b = np.eye(dim, dtype=complex)
    for k in range(degree - 1):
        a[k * msize:(k + 1) * msize, (k + 1) * msize:(k + 2) * msize] = np.eye(msize)
    for k in range(degree):
        a[(degree - 1) * msize:, k * msize:(k + 1) * msize] = -coeffs[k]
    b[(degree - 1) * msize:, (degree - 1) * msize:] = lead

    w, vr = scipy.linalg.eig(a, b)
    finite = np.isfinite(w)
    n_inf = int(np.sum(~finite))
    pairs = []
    for idx in np.nonzero(finite)[0]:
        lam = complex(w[idx])
        v = vr[:, idx]
        blocks = v.reshape(degree, msize)
        best = int(np.argmax(np.linalg.norm(blocks, axis=1)))
        x = blocks[best]
        nrm = np.linalg.norm(x)
        if nrm == 0:
            continue
        x = x / nrm
        val = sum(c @ x * lam**k for k, c in enumerate(coeffs))
        pairs.append((lam, x, float(np.linalg.norm(val))))
    pairs.sort(key=lambda t: (t[0].real, t[0].imag))
    return PepResult(pairs, n_inf, degree, msize)


# --- Newton polish ----------------------------------------------------------


def refine_eigenpair(p: FloquetProblem, seed: FloquetEigenpair, tol: float = 1e-10,
                     max_iter: int = 50) -> FloquetEigenpair:
    """Polish a seed against the exact transcendental operator.

    Bordered Newton iteration on {R(lambda) x = 0, x_pivot = 1}; on failure
    the seed is returned flagged unrefined.
    """
    if seed.residual >= 0.1:
        raise ValueError("refinement expects a seed with residual below 0.1")
    x = np.array(seed.eigenvector.flat, dtype=complex)
    idx = int(np.argmax(np.abs(x)))
    x = x / x[idx]
    lam = complex(seed.exponent)
    size = p.size
    for _ in range(max_iter):
        try:
            rmat = assemble_residual_matrix(p, lam)
        except BoundViolation:
            return replace(seed, refined=False)
        r = rmat @ x
        res = np.linalg.norm(r) / np.linalg.norm(x)
        if res < tol:
            return make_eigenpair(p, lam, x, res)
        jac = np.zeros((size + 1, size + 1), dtype=complex)
        jac[:size, :size] = rmat
        jac[:size, size] = residual_matrix_dlambda(p, lam) @ x
        jac[size, idx] = 1.0
        rhs = -np.concatenate([r, [x[idx] - 1.0]])
        try:
            delta = np.linalg.solve(jac, rhs)
        except np.linalg.LinAlgError:
            return replace(seed, refined=False)
        step = 1.0
        kc = p.critical_exponent
        if p.transfer is not None and p.transfer.truncation is None and math.isfinite(kc):
            # keep the iterate inside the transfer domain
            while step > 1e-6 and (lam + step * delta[size]).real <= -kc + 2 * BOUND_MARGIN:
                step *= 0.5
        x = x + step * delta[:size]
        lam = lam + step * delta[size]
    res = eigenpair_residual(p, lam, x)
    if res < tol:
        return make_eigenpair(p, lam, x, res)
    return replace(seed, refined=False)


# --- canonicalization -------------------------------------------------------


def _strip_steps(im: float, omega0: float) -> int:
    """Shift count mapping Im(lambda) into (-omega0/2, omega0/2]."""
    return int(math.ceil(im / omega0 - 0.5))


def canonicalize_spectrum(pairs, omega0: float, autonomous: bool = False,
                          merge_tol: float = MERGE_TOL,
                          trivial_factor: float = TRIVIAL_FACTOR,
                          stability_tol: float = STABILITY_TOL,
                          period: float | None = None,
                          diagnostics: dict | None = None) -> FloquetSpectrum:
    """Collapse splitting copies into classes and grade stability.

    Each exponent is shifted into the strip Im in (-omega0/2, omega0/2] (the
    upper edge is kept), classes closer than ``merge_tol`` keep their
    lowest-residual representative, and for autonomous problems the class
    nearest zero is labeled as the time-translation mode and excluded from
    the verdict.
    """
    period = period if period is not None else 2 * np.pi / omega0
    mapped = []
    for pair in pairs:
        m = _strip_steps(pair.exponent.imag, omega0)
        lam = pair.exponent - 1j * m * omega0
        vec = shift_harmonics(pair.eigenvector, m) if (m and pair.eigenvector is not None) \
            else pair.eigenvector
        mult = cmath.exp(lam * period)
        mapped.append(FloquetEigenpair(lam, mult, vec, pair.residual,
                                       bound_ok=pair.bound_ok, refined=pair.refined))

    mapped.sort(key=lambda q: (q.exponent.real, q.exponent.imag))
    classes: list[FloquetEigenpair] = []
    for cand in mapped:
        merged = False
        for i, rep in enumerate(classes):
            if abs(cand.exponent - rep.exponent) < merge_tol:
                if cand.residual < rep.residual:
                    classes[i] = cand
                merged = True
                break
        if not merged:
            classes.append(cand)

    # copies split across the strip boundary by rounding still belong together
    deduped: list[FloquetEigenpair] = []
    for cand in classes:
        merged = False
        for i, rep in enumerate(deduped):
            gap = cand.exponent - rep.exponent
            steps = round(gap.imag / omega0)
            if steps != 0 and abs(gap - 1j * steps * omega0) < merge_tol:
                if cand.residual < rep.residual:
                    deduped[i] = cand
                merged = True
                break
        if not merged:
            deduped.append(cand)
    classes = deduped

    if autonomous and classes:
        nearest = min(range(len(classes)), key=lambda i: abs(classes[i].exponent))
        if abs(classes[nearest].exponent) < trivial_factor * omega0:
            classes[nearest] = replace(classes[nearest], trivial=True)

    nontrivial = [c.exponent.real for c in classes if not c.trivial]
    if not nontrivial:
        stability = "Marginal"
    else:
        worst = max(nontrivial)
        if worst > stability_tol:
            stability = "Unstable"
        elif abs(worst) <= stability_tol:
            stability = "Marginal"
        else:
            stability = "Stable"

    classes.sort(key=lambda q: (-q.exponent.real, q.exponent.imag))
    return FloquetSpectrum(list(pairs), classes, stability, period,
                           diagnostics=dict(diagnostics or {}))


# --- end-to-end driver ------------------------------------------------------


def _edge_energy_fraction(vec: np.ndarray, dim: int, n_harmonics: int, band: int) -> float:
    m = 2 * n_harmonics + 1
    a = vec.reshape(dim, m)
    outer = np.concatenate([a[:, :band], a[:, m - band:]], axis=1)
    total = np.linalg.norm(a)
    return float(np.linalg.norm(outer) / total) if total > 0 else 1.0


def floquet_spectrum(p: FloquetProblem, taylor_degree: int = 4,
                     autonomous: bool = False, refine: bool = True,
                     merge_tol: float = MERGE_TOL, edge_tol: float = 1e-6,
                     stability_tol: float = STABILITY_TOL,
                     trivial_factor: float = TRIVIAL_FACTOR,
                     strip_reduce: bool = True) -> FloquetSpectrum:
    """Full pipeline: polynomial eigenproblem, filters, polish, classes.

    Untruncated exponential-family kernels go through the exact cleared
    quadratic; memoryless problems through the linear pencil; anything else
    through a Taylor polynomial of the requested degree.  Diagnostics count
    every discarded candidate (decay-bound violations, clearing artifacts at
    the kernel poles, truncation-edge pollution, failed polishes).
    """
    cleared = False
    if p.transfer is None:
        coeffs = taylor_pep(p, 1)
    elif p.transfer.truncation is None and isinstance(
            p.transfer.kernel, (ExponentialDecay, ModulatedExponential)):
        coeffs = cleared_pep(p)
        cleared = True
    else:
        coeffs = taylor_pep(p, taylor_degree)

    pep = solve_pep(coeffs)
    diag = {"n_raw": len(pep.eigenpairs), "n_infinite": pep.n_infinite,
            "n_bound_filtered": 0, "bound_filtered": [], "n_pole_guard": 0,
            "n_edge_filtered": 0, "n_unrefined": 0, "n_certificate_failed": 0,
            "n_seed_rejected": 0}

    kc = p.critical_exponent
    pole_shift = None
    if cleared:
        pole_shift = p.transfer.kernel.rate

    survivors = []
    for lam, vec, _pep_res in pep.eigenpairs:
        if pole_shift is not None and np.min(np.abs(lam + pole_shift + 1j * p.omegas)) < 1e-6:
            diag["n_pole_guard"] += 1
            continue
        if math.isfinite(kc) and lam.real <= -kc + BOUND_MARGIN:
            diag["n_bound_filtered"] += 1
            diag["bound_filtered"].append([lam.real, lam.imag])
            continue
        if p.n_harmonics >= 8:
            band = max(2, p.n_harmonics // 4)
            if _edge_energy_fraction(vec, p.dim, p.n_harmonics, band) > edge_tol:
                diag["n_edge_filtered"] += 1
                continue
        survivors.append((lam, vec))
    if diag["n_bound_filtered"]:
        log.info("discarded %d eigenvalue candidates below the decay bound %.6g",
                 diag["n_bound_filtered"], -kc)

    # one representative per strip location before the expensive polish
    reps: list[FloquetEigenpair] = []
    seen: list[tuple[complex, int]] = []
    for lam, vec in survivors:
        m = _strip_steps(lam.imag, p.omega0) if strip_reduce else 0
        lam_c = lam - 1j * m * p.omega0
        match = None
        for i, (prev, prev_m) in enumerate(seen):
            if abs(lam_c - prev) < merge_tol:
                match = i
                break
        if match is not None:
            if abs(m) < abs(seen[match][1]):  # prefer the best-centered copy
                seen[match] = (lam_c, m)
                reps[match] = _raw_pair(p, lam, vec)
            continue
        seen.append((lam_c, m))
        reps.append(_raw_pair(p, lam, vec))

    polished = []
    for pair in reps:
        if pair.residual >= 0.1:
            diag["n_seed_rejected"] += 1
            continue
        if refine:
            pair = refine_eigenpair(p, pair)
            if not pair.refined:
                diag["n_unrefined"] += 1
                continue
        if pair.residual >= CERTIFICATE_TOL:
            diag["n_certificate_failed"] += 1
            continue
        polished.append(pair)

    if strip_reduce:
        return canonicalize_spectrum(polished, p.omega0, autonomous=autonomous,
                                     merge_tol=merge_tol, trivial_factor=trivial_factor,
                                     stability_tol=stability_tol, period=p.period,
                                     diagnostics=diag)
    # time-invariant problems: exponents are plain eigenvalues, no strip folding
    dedup: list[FloquetEigenpair] = []
    for cand in sorted(polished, key=lambda q: (q.exponent.real, q.exponent.imag)):
        if any(abs(cand.exponent - r.exponent) < merge_tol for r in dedup):
            continue
        dedup.append(cand)
    nontrivial = [c.exponent.real for c in dedup]
    if not nontrivial:
        stability = "Marginal"
    else:
        worst = max(nontrivial)
        stability = ("Unstable" if worst > stability_tol
                     else "Marginal" if abs(worst) <= stability_tol else "Stable")
    dedup.sort(key=lambda q: (-q.exponent.real, q.exponent.imag))
    return FloquetSpectrum(polished, dedup, stability, p.period, diagnostics=diag)


def _raw_pair(p: FloquetProblem, lam: complex, vec: np.ndarray) -> FloquetEigenpair:
    res = eigenpair_residual(p, lam, vec)
    return make_eigenpair(p, lam, vec, res, refined=False)
