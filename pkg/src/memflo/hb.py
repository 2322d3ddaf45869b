"""Dense spectral machinery for band-limited periodic signals.

A T-periodic signal truncated to ``N`` harmonics is held either as complex
amplitudes ``a_h`` (h = -N..N, ascending) or as ``2N+1`` samples on the
uniform grid ``t_k = k*T/(2N+1)``, ``k = 1..2N+1``.  Vector signals are laid
out component-major: the flat index of (component ``c``, harmonic ``h``) is
``c*(2N+1) + (h+N)``, and the same convention orders the time samples.

The transform is kept as an explicit dense matrix pair because the
eigenproblem assembly consumes the matrices themselves; FFT acceleration is
deliberately out of scope at these sizes.  Multiplication by a periodic
matrix becomes a block Toeplitz operator on the amplitudes; products are
formed from Fourier coefficients gathered on an oversampled grid so that
quadratic nonlinearities stay alias-free in the retained band.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "HarmonicVector",
    "TimeSamples",
    "DftOperator",
    "DiffOperator",
    "ToeplitzMatrix",
    "MatrixHarmonics",
    "dft",
    "idft",
    "differentiate",
    "toeplitz_from_periodic",
    "sample_times",
    "stacked_diff_matrix",
    "pack_real_coefficients",
    "unpack_real_coefficients",
    "real_coefficient_basis",
    "extract_real_rows",
]

_SYMMETRY_TOL = 1e-12


def sample_times(n_harmonics: int, period: float) -> np.ndarray:
    """Uniform collocation grid t_k = k*T/(2N+1), k = 1..2N+1 (interval ]0, T])."""
    m = 2 * n_harmonics + 1
    return period * np.arange(1, m + 1) / m


@functools.lru_cache(maxsize=None)
def _dft_pair(n_harmonics: int):
    """Forward/inverse DFT matrices for the pinned grid and harmonic ordering."""
    m = 2 * n_harmonics + 1
    h = np.arange(-n_harmonics, n_harmonics + 1)
    k = np.arange(1, m + 1)
    forward = np.exp(-2j * np.pi * np.outer(h, k) / m) / m
    inverse = np.exp(2j * np.pi * np.outer(k, h) / m)
    forward.setflags(write=False)
    inverse.setflags(write=False)
    return forward, inverse


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeSamples:
    """Equispaced samples of a periodic vector signal over one period.

    ``samples`` has shape (dim, 2N+1); the sample count must be odd.
    """

    dim: int
    samples: np.ndarray
    period: float

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.samples))
        if s.shape[0] != self.dim:
            raise ValueError(f"expected {self.dim} signal components, got {s.shape[0]}")
        if s.shape[1] % 2 != 1:
            raise ValueError("sample count must be odd (2*n_harmonics + 1)")
        if self.period <= 0:
            raise ValueError("period must be positive")
        object.__setattr__(self, "samples", _readonly(s))

    @property
    def n_harmonics(self) -> int:
        return (self.samples.shape[1] - 1) // 2

    @property
    def times(self) -> np.ndarray:
        return sample_times(self.n_harmonics, self.period)


@dataclass(frozen=True)
class HarmonicVector:
    """Truncated complex-exponential Fourier representation of a periodic signal.

    ``amplitudes`` has shape (dim, 2N+1) with harmonics ordered -N..N.  When
    ``real_signal`` is set the coefficients must be conjugate symmetric,
    a(c, -h) == conj(a(c, h)).
    """

    dim: int
    n_harmonics: int
    amplitudes: np.ndarray
    omega0: float
    real_signal: bool = False

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.amplitudes, dtype=complex))
        m = 2 * self.n_harmonics + 1
        if a.shape != (self.dim, m):
            raise ValueError(f"amplitudes must have shape ({self.dim}, {m}), got {a.shape}")
        if self.omega0 <= 0:
            raise ValueError("omega0 must be positive")
        if self.real_signal:
            defect = np.max(np.abs(a[:, ::-1].conj() - a))
            if defect > _SYMMETRY_TOL * (1.0 + np.max(np.abs(a))):
                raise ValueError(f"conjugate symmetry violated by {defect:.3e}")
        object.__setattr__(self, "amplitudes", _readonly(a))

    @property
    def period(self) -> float:
        return 2 * np.pi / self.omega0

    @property
    def harmonics(self) -> np.ndarray:
        return np.arange(-self.n_harmonics, self.n_harmonics + 1)

    @property
    def flat(self) -> np.ndarray:
        """Component-major flattening, length dim*(2N+1)."""
        return self.amplitudes.reshape(-1)

    def amplitude(self, component: int, harmonic: int) -> complex:
        if abs(harmonic) > self.n_harmonics:
            raise IndexError(f"harmonic {harmonic} outside +-{self.n_harmonics}")
        return complex(self.amplitudes[component, harmonic + self.n_harmonics])

    def evaluate(self, t) -> np.ndarray:
        """Evaluate the truncated series at arbitrary times; shape (dim, len(t))."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        phases = np.exp(1j * self.omega0 * np.outer(self.harmonics, t))
        return self.amplitudes @ phases

    @classmethod
    def from_flat(cls, flat, dim, n_harmonics, omega0, real_signal=False):
        a = np.asarray(flat, dtype=complex).reshape(dim, 2 * n_harmonics + 1)
        return cls(dim, n_harmonics, a, omega0, real_signal)


@dataclass(frozen=True)
class DftOperator:
    """Explicit matrix pair mapping time samples to harmonic amplitudes."""

    n_harmonics: int
    forward: np.ndarray
    inverse: np.ndarray

    def __post_init__(self):
        m = 2 * self.n_harmonics + 1
        eye_defect = np.max(np.abs(self.forward @ self.inverse - np.eye(m)))
        if eye_defect > 1e-12 * m:
            raise ValueError(f"forward*inverse deviates from identity by {eye_defect:.3e}")

    @classmethod
    def build(cls, n_harmonics: int) -> "DftOperator":
        fwd, inv = _dft_pair(n_harmonics)
        return cls(n_harmonics, fwd, inv)


@dataclass(frozen=True)
class DiffOperator:
    """Diagonal differentiation operator; entry for harmonic h is i*h*omega0."""

    n_harmonics: int
    omega0: float

    @property
    def matrix(self) -> np.ndarray:
        h = np.arange(-self.n_harmonics, self.n_harmonics + 1)
        return np.diag(1j * h * self.omega0)


def dft(x: TimeSamples, n_harmonics: int | None = None) -> HarmonicVector:
    """Transform time samples to harmonic amplitudes.

    The sample count fixes the truncation; passing ``n_harmonics`` asserts it.
    """
    n = x.n_harmonics
    if n_harmonics is not None and n_harmonics != n:
        raise ValueError(
            f"sample count {x.samples.shape[1]} does not match n_harmonics={n_harmonics}"
        )
    fwd, _ = _dft_pair(n)
    amps = x.samples @ fwd.T
    real = bool(np.max(np.abs(np.asarray(x.samples).imag)) == 0.0) if np.iscomplexobj(x.samples) else True
    return HarmonicVector(x.dim, n, amps, 2 * np.pi / x.period, real_signal=real)


def idft(a: HarmonicVector) -> TimeSamples:
    """Evaluate the truncated series on the collocation grid."""
    _, inv = _dft_pair(a.n_harmonics)
    samples = a.amplitudes @ inv.T
    return TimeSamples(a.dim, samples, a.period)


def differentiate(a: HarmonicVector) -> HarmonicVector:
    """Time derivative in harmonic form: a_h -> i*h*omega0 * a_h."""
    factors = 1j * a.harmonics * a.omega0
    return HarmonicVector(a.dim, a.n_harmonics, a.amplitudes * factors, a.omega0,
                          real_signal=a.real_signal)


@dataclass(frozen=True)
class MatrixHarmonics:
    """Fourier coefficients of a periodic matrix-valued signal.

    ``coeffs`` has shape (rows, cols, 2N+1), harmonic index ordered -N..N.
    """

    rows: int
    cols: int
    n_harmonics: int
    coeffs: np.ndarray
    omega0: float

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        m = 2 * self.n_harmonics + 1
        if c.shape != (self.rows, self.cols, m):
            raise ValueError(f"coeffs must have shape ({self.rows}, {self.cols}, {m})")
        object.__setattr__(self, "coeffs", _readonly(c))

    @classmethod
    def constant(cls, mat, omega0: float) -> "MatrixHarmonics":
        mat = np.atleast_2d(np.asarray(mat, dtype=complex))
        c = mat[:, :, None]
        return cls(mat.shape[0], mat.shape[1], 0, c, omega0)

    @classmethod
    def from_time_grid(cls, values, period: float, n_keep: int) -> "MatrixHarmonics":
        """Coefficients -n_keep..n_keep from samples on t_g = g*T/G, g = 1..G."""
        values = np.asarray(values)
        rows, cols, g = values.shape
        if g < 2 * n_keep + 1:
            raise ValueError("grid too coarse for the requested coefficient band")
        k = np.arange(1, g + 1)
        h = np.arange(-n_keep, n_keep + 1)
        basis = np.exp(-2j * np.pi * np.outer(h, k) / g) / g
        coeffs = np.einsum("rcg,hg->rch", values.astype(complex), basis)
        return cls(rows, cols, n_keep, coeffs, 2 * np.pi / period)

    def coefficient(self, harmonic: int) -> np.ndarray:
        """The (rows, cols) coefficient matrix of one harmonic; zero out of band."""
        if abs(harmonic) > self.n_harmonics:
            return np.zeros((self.rows, self.cols), dtype=complex)
        return np.asarray(self.coeffs[:, :, harmonic + self.n_harmonics])

    def evaluate(self, t: float) -> np.ndarray:
        h = np.arange(-self.n_harmonics, self.n_harmonics + 1)
        return (self.coeffs * np.exp(1j * self.omega0 * h * t)).sum(axis=2)

    def element(self, r: int, c: int, omega0: float | None = None) -> HarmonicVector:
        return HarmonicVector(1, self.n_harmonics, self.coeffs[r, c][None, :],
                              omega0 or self.omega0)


@dataclass(frozen=True)
class ToeplitzMatrix:
    """Block representation of multiplication by a periodic matrix.

    ``blocks[r, c]`` is the (2N+1)x(2N+1) Toeplitz matrix whose (j, l) entry
    is the (j-l)-th Fourier coefficient of matrix element (r, c); coefficients
    beyond the supplied band are zero.
    """

    dim: int
    n_harmonics: int
    blocks: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.blocks, dtype=complex)
        m = 2 * self.n_harmonics + 1
        if b.shape != (self.dim, self.dim, m, m):
            raise ValueError("blocks must have shape (dim, dim, 2N+1, 2N+1)")
        object.__setattr__(self, "blocks", _readonly(b))

    def matrix(self) -> np.ndarray:
        """Full dense operator in the component-major flat layout."""
        m = 2 * self.n_harmonics + 1
        return self.blocks.transpose(0, 2, 1, 3).reshape(self.dim * m, self.dim * m)

    def apply(self, a: HarmonicVector) -> HarmonicVector:
        if a.dim != self.dim or a.n_harmonics != self.n_harmonics:
            raise ValueError("operand layout does not match the Toeplitz operator")
        out = self.matrix() @ a.flat
        return HarmonicVector.from_flat(out, self.dim, self.n_harmonics, a.omega0)


def _as_matrix_harmonics(elements) -> MatrixHarmonics:
    if isinstance(elements, MatrixHarmonics):
        return elements
    rows = list(elements)
    n_rows = len(rows)
    n_cols = len(rows[0])
    first = rows[0][0]
    n = first.n_harmonics
    omega0 = first.omega0
    coeffs = np.empty((n_rows, n_cols, 2 * n + 1), dtype=complex)
    for r, row in enumerate(rows):
        if len(row) != n_cols:
            raise ValueError("ragged element table")
        for c, hv in enumerate(row):
            if hv.n_harmonics != n:
                raise ValueError("inconsistent n_harmonics across matrix elements")
            if hv.dim != 1:
                raise ValueError("matrix elements must be scalar signals")
            coeffs[r, c] = hv.amplitudes[0]
    return MatrixHarmonics(n_rows, n_cols, n, coeffs, omega0)


def toeplitz_from_periodic(elements, n_harmonics: int | None = None) -> ToeplitzMatrix:
    """Build the block Toeplitz operator of a periodic matrix signal.

    ``elements`` is a :class:`MatrixHarmonics` or a nested sequence of scalar
    :class:`HarmonicVector` per matrix entry (all with the same truncation).
    ``n_harmonics`` sets the operand truncation; by default it matches the
    coefficient band.  Supplying a wider coefficient band than the operand
    truncation keeps products exact for polynomial nonlinearities.
    """
    mh = _as_matrix_harmonics(elements)
    if mh.rows != mh.cols:
        raise ValueError("Toeplitz assembly needs a square matrix signal")
    n_out = mh.n_harmonics if n_harmonics is None else n_harmonics
    m = 2 * n_out + 1
    # padded lookup over coefficient differences j-l in [-(m-1), m-1]
    table = np.zeros((mh.rows, mh.cols, 2 * m - 1), dtype=complex)
    lo = max(-(m - 1), -mh.n_harmonics)
    hi = min(m - 1, mh.n_harmonics)
    for d in range(lo, hi + 1):
        table[:, :, d + m - 1] = mh.coeffs[:, :, d + mh.n_harmonics]
    j = np.arange(m)
    diff = j[:, None] - j[None, :] + m - 1
    blocks = table[:, :, diff]
    return ToeplitzMatrix(mh.rows, n_out, blocks)


def stacked_diff_matrix(dim: int, n_harmonics: int, omega0: float) -> np.ndarray:
    """Differentiation operator on the component-major flat layout."""
    h = np.arange(-n_harmonics, n_harmonics + 1)
    return np.kron(np.eye(dim), np.diag(1j * h * omega0))


# ---------------------------------------------------------------------------
# Real packing of conjugate-symmetric coefficient sets.
#
# Per component the real unknowns are ordered [a_0.re, a_1.re, a_1.im,
# a_2.re, a_2.im, ...]; negative harmonics follow by conjugation.  This keeps
# Newton systems square and real.
# ---------------------------------------------------------------------------


def pack_real_coefficients(amps: np.ndarray) -> np.ndarray:
    """Flatten conjugate-symmetric (dim, 2N+1) amplitudes to dim*(2N+1) reals."""
    amps = np.atleast_2d(amps)
    dim, m = amps.shape
    n = (m - 1) // 2
    out = np.empty(dim * m)
    for c in range(dim):
        base = c * m
        out[base] = amps[c, n].real
        for h in range(1, n + 1):
            out[base + 2 * h - 1] = amps[c, n + h].real
            out[base + 2 * h] = amps[c, n + h].imag
    return out


def unpack_real_coefficients(u: np.ndarray, dim: int, n_harmonics: int) -> np.ndarray:
    """Inverse of :func:`pack_real_coefficients`; restores conjugate symmetry."""
    m = 2 * n_harmonics + 1
    amps = np.zeros((dim, m), dtype=complex)
    for c in range(dim):
        base = c * m
        amps[c, n_harmonics] = u[base]
        for h in range(1, n_harmonics + 1):
            val = u[base + 2 * h - 1] + 1j * u[base + 2 * h]
            amps[c, n_harmonics + h] = val
            amps[c, n_harmonics - h] = val.conjugate()
    return amps


@functools.lru_cache(maxsize=None)
def real_coefficient_basis(dim: int, n_harmonics: int) -> np.ndarray:
    """Columns are d(flat amplitudes)/d(packed real unknowns)."""
    m = 2 * n_harmonics + 1
    e = np.zeros((dim * m, dim * m), dtype=complex)
    for c in range(dim):
        base = c * m
        e[base + n_harmonics, base] = 1.0
        for h in range(1, n_harmonics + 1):
            col = base + 2 * h - 1
            e[base + n_harmonics + h, col] = 1.0
            e[base + n_harmonics - h, col] = 1.0
            e[base + n_harmonics + h, col + 1] = 1j
            e[base + n_harmonics - h, col + 1] = -1j
    e.setflags(write=False)
    return e


def extract_real_rows(w: np.ndarray, dim: int, n_harmonics: int) -> np.ndarray:
    """Project complex flat rows onto the packed real row layout.

    For a conjugate-symmetric residual this loses no information.
    """
    w = np.asarray(w)
    m = 2 * n_harmonics + 1
    vector = w.ndim == 1
    if vector:
        w = w[:, None]
    out = np.empty((dim * m, w.shape[1]))
    for c in range(dim):
        base = c * m
        out[base] = w[base + n_harmonics].real
        for h in range(1, n_harmonics + 1):
            out[base + 2 * h - 1] = w[base + n_harmonics + h].real
            out[base + 2 * h] = w[base + n_harmonics + h].imag
    return out[:, 0] if vector else out
