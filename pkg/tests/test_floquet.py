"""Eigenproblem tests: assembly, scalar roots, PEP routes, polish, classes."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memflo import floquet as F
from memflo import hb
from memflo import kernels as K
from memflo.errors import SingularLeading
from memflo.oracles import (
    monodromy_multipliers,
    pep_determinant,
    quadratic_memory_exponent,
)

LAM_A0_K3 = 0.30277563773199456   # (-3 + sqrt(13)) / 2
LAM_AM2_K3 = -1.3819660112501051  # (-5 + sqrt(5)) / 2


def scalar_problem(a, k, s=math.inf, n_harmonics=0, period=2 * math.pi):
    omega0 = 2 * math.pi / period
    jac = hb.toeplitz_from_periodic(hb.MatrixHarmonics.constant([[a]], omega0),
                                    n_harmonics=n_harmonics)
    mt = K.MemoryTransfer(K.ExponentialDecay([[1.0]], k),
                          truncation=None if math.isinf(s) else s)
    return F.FloquetProblem(jac, mt, period, n_harmonics, 1)


def memoryless_problem(a, n_harmonics=2, period=2 * math.pi):
    omega0 = 2 * math.pi / period
    jac = hb.toeplitz_from_periodic(hb.MatrixHarmonics.constant([[a]], omega0),
                                    n_harmonics=n_harmonics)
    return F.FloquetProblem(jac, None, period, n_harmonics, 1)


# --- residual assembly ----------------------------------------------------------


def test_assemble_memoryless_constant_diagonal():
    a = 0.7
    p = memoryless_problem(a, n_harmonics=2)
    lam = 0.3 + 0.1j
    r = F.assemble_residual_matrix(p, lam)
    expected = np.diag([lam + 1j * h - a for h in range(-2, 3)])
    assert np.max(np.abs(r - expected)) < 1e-14


def test_assemble_scalar_memory_root_is_singular():
    p = scalar_problem(0.0, 3.0, n_harmonics=2)
    r = F.assemble_residual_matrix(p, LAM_A0_K3)
    assert np.linalg.svd(r, compute_uv=False)[-1] < 1e-5


def test_assemble_delay_diagonal():
    n = 1
    period = 2 * math.pi
    jac = hb.toeplitz_from_periodic(hb.MatrixHarmonics.constant([[0.0]], 1.0),
                                    n_harmonics=n)
    mt = K.MemoryTransfer(K.Delay([[1.0]], 0.5))
    p = F.FloquetProblem(jac, mt, period, n, 1)
    lam = 0.2 + 0.3j
    r = F.assemble_residual_matrix(p, lam)
    for idx, h in enumerate(range(-n, n + 1)):
        want = lam + 1j * h - np.exp(-(lam + 1j * h) * 0.5)
        assert r[idx, idx] == pytest.approx(want, abs=1e-14)


# --- scalar root hunting ---------------------------------------------------------


def test_solve_scalar_asymptotic_memory():
    spec = F.solve_scalar(scalar_problem(0.0, 3.0))
    assert len(spec.canonical_strip) == 1
    assert spec.canonical_strip[0].exponent == pytest.approx(LAM_A0_K3, abs=1e-10)


def test_solve_scalar_no_memory_window():
    spec = F.solve_scalar(scalar_problem(1.0, 3.0, s=0.0))
    assert spec.canonical_strip[0].exponent == pytest.approx(1.0, abs=1e-12)


def test_solve_scalar_filters_invalid_quadratic_root():
    spec = F.solve_scalar(scalar_problem(-2.0, 3.0))
    exps = [p.exponent for p in spec.canonical_strip]
    assert len(exps) == 1
    assert exps[0] == pytest.approx(LAM_AM2_K3, abs=1e-10)
    # the second quadratic root sits below -k and must not be reported
    assert all(e.real > -3.0 for e in exps)


def test_solve_scalar_matches_quadratic_oracle_across_rates():
    for a in (-2.0, -1.0, 0.0, 1.0, 2.0):
        spec = F.solve_scalar(scalar_problem(a, 3.0))
        lam = max(p.exponent.real for p in spec.canonical_strip)
        assert lam == pytest.approx(quadratic_memory_exponent(a, 3.0), abs=1e-10)


# --- taylor and cleared PEPs ------------------------------------------------------


def test_taylor_pep_memoryless_is_linear():
    p = memoryless_problem(0.5, n_harmonics=1)
    coeffs = F.taylor_pep(p, 3)
    omega = hb.stacked_diff_matrix(1, 1, 1.0)
    assert np.allclose(coeffs[0], omega - 0.5 * np.eye(3), atol=1e-14)
    assert np.allclose(coeffs[1], np.eye(3), atol=1e-14)
    assert np.max(np.abs(coeffs[2])) == 0.0
    assert np.max(np.abs(coeffs[3])) == 0.0


def test_taylor_pep_exponential_blocks_are_geometric():
    k = 3.0
    p = scalar_problem(0.0, k, n_harmonics=1)
    coeffs = F.taylor_pep(p, 3)
    for idx, h in enumerate(range(-1, 2)):
        c0 = k + 1j * h
        for m in range(2, 4):
            assert coeffs[m][idx, idx] == pytest.approx(-(-1) ** m / c0 ** (m + 1),
                                                        abs=1e-14)


def test_cleared_pep_equals_scaled_residual():
    # multiplying R(lambda) rows by (k + lambda + i w_j) gives the quadratic
    rng = np.random.default_rng(8)
    n = 2
    p = scalar_problem(0.4, 2.0, n_harmonics=n)
    coeffs = F.cleared_pep(p)
    for lam in (0.3 + 0.2j, -0.5 + 1.1j):
        r = F.assemble_residual_matrix(p, lam)
        scale = np.diag(2.0 + lam + 1j * p.omegas)
        lhs = sum(c * lam**m for m, c in enumerate(coeffs))
        assert np.max(np.abs(lhs - scale @ r)) < 1e-12


def test_cleared_pep_skips_memoryless_rows():
    # kernel acting on the second component only: first rows stay linear
    omega0 = 1.0
    jac = hb.toeplitz_from_periodic(
        hb.MatrixHarmonics.constant([[0.0, 1.0], [-1.0, 0.0]], omega0), n_harmonics=1)
    c = np.array([[0.0, 0.0], [0.0, 1.0]])
    mt = K.MemoryTransfer(K.ExponentialDecay(c, 2.0))
    p = F.FloquetProblem(jac, mt, 2 * math.pi, 1, 2)
    p0, p1, p2 = F.cleared_pep(p)
    m = 3
    assert np.max(np.abs(p2[:m, :])) == 0.0      # position rows degree 1
    assert np.allclose(p2[m:, m:], np.eye(m), atol=1e-15)


# --- solve_pep --------------------------------------------------------------------


def test_solve_pep_degree_one():
    res = F.solve_pep([np.array([[-2.0]]), np.array([[1.0]])])
    assert res.total == 1
    assert res.eigenpairs[0][0] == pytest.approx(2.0, abs=1e-12)


def test_solve_pep_degree_two_scalar():
    res = F.solve_pep([np.array([[-1.0]]), np.array([[0.0]]), np.array([[1.0]])])
    lams = sorted(l.real for l, _, _ in res.eigenpairs)
    assert lams == pytest.approx([-1.0, 1.0], abs=1e-12)


def test_solve_pep_random_against_determinant_scan():
    rng = np.random.default_rng(12)
    for _ in range(10):
        m = rng.integers(2, 5)
        coeffs = [rng.normal(size=(m, m)) for _ in range(3)]
        res = F.solve_pep(coeffs)
        assert res.total == 2 * m
        for lam, vec, resid in res.eigenpairs:
            assert resid < 1e-8
            assert abs(pep_determinant(coeffs, lam)) < 1e-6


def test_solve_pep_counts_infinite_eigenvalues():
    p2 = np.diag([1.0, 0.0])  # singular leading block
    res = F.solve_pep([np.eye(2), np.eye(2), p2])
    assert res.total == 4
    assert res.n_infinite >= 1
    with pytest.raises(SingularLeading):
        F.solve_pep([np.eye(2), np.eye(2), p2], allow_infinite=False)


# --- refinement -------------------------------------------------------------------


def test_refine_exact_pair_is_fixed_point():
    p = memoryless_problem(0.5, n_harmonics=1)
    vec = np.zeros(3, dtype=complex)
    vec[1] = 1.0
    seed = F.make_eigenpair(p, 0.5, vec, 0.0)
    out = F.refine_eigenpair(p, seed)
    assert out.exponent == pytest.approx(0.5, abs=1e-14)
    assert out.residual < 1e-14


def test_refine_scalar_memory_seed():
    p = scalar_problem(0.0, 3.0, n_harmonics=2)
    vec = np.zeros(5, dtype=complex)
    vec[2] = 1.0
    seed = F.make_eigenpair(p, 0.30, vec, F.eigenpair_residual(p, 0.30, vec))
    out = F.refine_eigenpair(p, seed)
    assert out.refined
    assert out.exponent == pytest.approx(LAM_A0_K3, abs=1e-10)
    assert out.residual < 1e-10


def test_refine_recovers_from_perturbed_vector():
    rng = np.random.default_rng(4)
    p = scalar_problem(0.0, 3.0, n_harmonics=2)
    vec = np.zeros(5, dtype=complex)
    vec[2] = 1.0
    vec += 1e-3 * (rng.normal(size=5) + 1j * rng.normal(size=5))
    seed = F.make_eigenpair(p, LAM_A0_K3, vec, F.eigenpair_residual(p, LAM_A0_K3, vec))
    out = F.refine_eigenpair(p, seed)
    assert out.residual < 1e-10
    assert out.exponent == pytest.approx(LAM_A0_K3, abs=1e-9)


def test_refine_rejects_bad_seed():
    p = scalar_problem(0.0, 3.0, n_harmonics=1)
    vec = np.ones(3, dtype=complex)
    with pytest.raises(ValueError, match="residual"):
        F.refine_eigenpair(p, F.make_eigenpair(p, 5.0, vec, 0.5))


# --- canonicalization --------------------------------------------------------------


def _plain_pair(lam, period=2 * math.pi, residual=0.0, n=2):
    vec = np.zeros(2 * n + 1, dtype=complex)
    vec[n] = 1.0
    hv = hb.HarmonicVector(1, n, vec[None, :], 2 * math.pi / period)
    return F.FloquetEigenpair(lam, np.exp(lam * period), hv, residual)


def test_canonicalize_merges_splitting_ladder():
    omega0 = 1.0
    lam = 0.1 + 0.2j
    pairs = [_plain_pair(lam), _plain_pair(lam + 1j * omega0), _plain_pair(lam + 2j * omega0)]
    spec = F.canonicalize_spectrum(pairs, omega0)
    assert len(spec.canonical_strip) == 1
    assert spec.canonical_strip[0].exponent == pytest.approx(lam, abs=1e-12)
    assert spec.canonical_strip[0].multiplier == pytest.approx(np.exp(lam * 2 * math.pi),
                                                               abs=1e-10)


def test_canonicalize_keeps_upper_strip_edge():
    omega0 = 2.0
    lam = 0.3 + 1j * omega0 / 2
    spec = F.canonicalize_spectrum([_plain_pair(lam, period=math.pi)], omega0)
    assert spec.canonical_strip[0].exponent == pytest.approx(lam, abs=1e-12)
    lam_low = 0.3 - 1j * omega0 / 2
    spec = F.canonicalize_spectrum([_plain_pair(lam_low, period=math.pi)], omega0)
    assert spec.canonical_strip[0].exponent == pytest.approx(lam, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=-2, max_value=2), st.floats(min_value=-20, max_value=20),
       st.floats(min_value=0.5, max_value=4.0))
def test_canonicalize_strip_property(re, im, omega0):
    period = 2 * math.pi / omega0
    spec = F.canonicalize_spectrum([_plain_pair(complex(re, im), period=period)], omega0)
    lam = spec.canonical_strip[0].exponent
    assert -omega0 / 2 < lam.imag <= omega0 / 2 + 1e-12
    assert lam.real == pytest.approx(re, abs=1e-12)
    # multiplier is the same as for the raw exponent
    assert spec.canonical_strip[0].multiplier == pytest.approx(
        np.exp(complex(re, im) * period), rel=1e-9)


def test_canonicalize_trivial_class_exclusion():
    omega0 = 1.0
    pairs = [_plain_pair(1e-9 + 0j), _plain_pair(-0.4 + 0j)]
    spec = F.canonicalize_spectrum(pairs, omega0, autonomous=True)
    trivial = [p for p in spec.canonical_strip if p.trivial]
    assert len(trivial) == 1
    assert spec.stability == "Stable"
    # without the autonomous flag the near-zero class decides the verdict
    spec2 = F.canonicalize_spectrum(pairs, omega0, autonomous=False)
    assert spec2.stability == "Marginal"


def test_stability_thresholds():
    omega0 = 1.0
    assert F.canonicalize_spectrum([_plain_pair(0.5)], omega0).stability == "Unstable"
    assert F.canonicalize_spectrum([_plain_pair(-0.5)], omega0).stability == "Stable"
    assert F.canonicalize_spectrum([_plain_pair(1e-8 + 0j)], omega0).stability == "Marginal"


# --- end-to-end spectra -------------------------------------------------------------


def periodic_2d_problem(n_harmonics=16, period=2 * math.pi):
    omega0 = 2 * math.pi / period

    def a_of_t(t):
        return np.array([[-0.3 + 0.5 * np.cos(omega0 * t), 1.0],
                         [-1.0, -0.2 + 0.4 * np.sin(omega0 * t)]])

    g = 4 * n_harmonics + 1
    times = period * np.arange(1, g + 1) / g
    samples = np.stack([a_of_t(t) for t in times], axis=2)
    mh = hb.MatrixHarmonics.from_time_grid(samples, period, 2 * n_harmonics)
    jac = hb.toeplitz_from_periodic(mh, n_harmonics=n_harmonics)
    return F.FloquetProblem(jac, None, period, n_harmonics, 2), a_of_t


def match_nearest(got, want):
    """Greedy pairing of two eigenvalue sets; returns the worst relative gap."""
    got = list(got)
    worst = 0.0
    for w in want:
        gaps = [abs(g - w) for g in got]
        i = int(np.argmin(gaps))
        worst = max(worst, gaps[i] / max(abs(w), 1e-300))
        got.pop(i)
    return worst


def test_memoryless_multipliers_match_monodromy_oracle():
    p, a_of_t = periodic_2d_problem()
    spec = F.floquet_spectrum(p)
    assert len(spec.canonical_strip) == 2
    want = monodromy_multipliers(a_of_t, 2, p.period)
    assert match_nearest(spec.multipliers, want) < 1e-6


def test_splitting_closure_of_computed_pairs():
    p, _ = periodic_2d_problem()
    spec = F.floquet_spectrum(p)
    for pair in spec.canonical_strip:
        shifted = F.splitting_shift(p, pair)
        assert shifted.residual < 1e-8
        merged = F.canonicalize_spectrum([pair, shifted], p.omega0)
        assert len(merged.canonical_strip) == 1


def test_splitting_closure_with_memory():
    p = scalar_problem(0.0, 3.0, n_harmonics=6)
    spec = F.floquet_spectrum(p)
    assert len(spec.canonical_strip) == 1
    shifted = F.splitting_shift(p, spec.canonical_strip[0])
    assert shifted.residual < 1e-10


def test_floquet_spectrum_residual_certificate():
    p, _ = periodic_2d_problem(n_harmonics=12)
    spec = F.floquet_spectrum(p)
    for pair in spec.canonical_strip:
        assert pair.residual < 1e-8
        assert abs(pair.multiplier - np.exp(pair.exponent * p.period)) \
            <= 1e-12 * abs(pair.multiplier)


def test_floquet_spectrum_bound_filter_diagnostics():
    p = scalar_problem(0.0, 3.0, n_harmonics=3)
    spec = F.floquet_spectrum(p)
    # the invalid branch of the cleared quadratic is discarded and logged
    assert spec.diagnostics["n_bound_filtered"] == 7
    assert all(re <= -3.0 + 1e-6 for re, _ in spec.diagnostics["bound_filtered"])
    assert len(spec.canonical_strip) == 1
    assert spec.canonical_strip[0].exponent == pytest.approx(LAM_A0_K3, abs=1e-10)


def test_solve_scalar_rejects_periodic_coefficient():
    coeffs = np.zeros((1, 1, 3), dtype=complex)
    coeffs[0, 0, 1] = 0.5
    coeffs[0, 0, 0] = coeffs[0, 0, 2] = 0.2  # genuinely periodic a(t)
    mh = hb.MatrixHarmonics(1, 1, 1, coeffs, omega0=1.0)
    jac = hb.toeplitz_from_periodic(mh)
    mt = K.MemoryTransfer(K.ExponentialDecay([[1.0]], 3.0))
    p = F.FloquetProblem(jac, mt, 2 * math.pi, 1, 1)
    with pytest.raises(ValueError, match="constant"):
        F.solve_scalar(p)


# --- taylor-route spectra for non-rational kernels ----------------------------------


def test_taylor_route_matches_scalar_route_for_finite_window():
    # finite memory window: the polynomial route with Newton polish must agree
    # with direct scalar root hunting
    p = scalar_problem(0.0, 3.0, s=2.0, n_harmonics=3)
    spec_taylor = F.floquet_spectrum(p, taylor_degree=4)
    spec_scalar = F.solve_scalar(p)
    lam_t = max(q.exponent.real for q in spec_taylor.canonical_strip)
    lam_s = max(q.exponent.real for q in spec_scalar.canonical_strip)
    assert lam_t == pytest.approx(lam_s, abs=1e-9)
    assert all(q.residual < 1e-8 for q in spec_taylor.canonical_strip)


def test_sampled_kernel_spectrum_matches_closed_form_window():
    # a sampled exponential with compact support equals the truncated window
    k, support = 3.0, 2.0
    u = np.linspace(0, support, 240)
    values = np.exp(-k * u)[None, :, None, None]
    mt = K.MemoryTransfer(K.FiniteSupportSampled(values, support))
    jac = hb.toeplitz_from_periodic(hb.MatrixHarmonics.constant([[0.0]], 1.0),
                                    n_harmonics=2)
    p = F.FloquetProblem(jac, mt, 2 * math.pi, 2, 1)
    spec = F.floquet_spectrum(p, taylor_degree=4)
    ref = F.solve_scalar(scalar_problem(0.0, k, s=support, n_harmonics=2))
    lam_ref = max(q.exponent.real for q in ref.canonical_strip)
    lam = max(q.exponent.real for q in spec.canonical_strip)
    assert lam == pytest.approx(lam_ref, abs=1e-7)


def test_delay_kernel_characteristic_root():
    # dy/dt = a y(t) + b y(t - tau): exponents solve lam = a + b e^{-lam tau}
    a, b, tau = -1.0, 0.5, 1.0
    omega0 = 1.0
    jac = hb.toeplitz_from_periodic(hb.MatrixHarmonics.constant([[a]], omega0),
                                    n_harmonics=2)
    mt = K.MemoryTransfer(K.Delay([[b]], tau))
    p = F.FloquetProblem(jac, mt, 2 * math.pi, 2, 1)

    # independent oracle: plain Newton on the scalar characteristic equation
    lam = 0.0
    for _ in range(200):
        g = lam - a - b * math.exp(-lam * tau)
        gp = 1.0 + b * tau * math.exp(-lam * tau)
        lam -= g / gp
    assert abs(lam - a - b * math.exp(-lam * tau)) < 1e-14

    spec = F.solve_scalar(p)
    lam_s = max(q.exponent.real for q in spec.canonical_strip)
    assert lam_s == pytest.approx(lam, abs=1e-10)

    spec_m = F.floquet_spectrum(p, taylor_degree=4)
    lam_m = max(q.exponent.real for q in spec_m.canonical_strip)
    assert lam_m == pytest.approx(lam, abs=1e-9)


def test_canonicalize_merges_copies_split_across_strip_edge():
    omega0 = 2.0
    eps = 1e-12
    upper = _plain_pair(0.1 + 1j * (omega0 / 2 - eps), period=math.pi, residual=1e-12)
    lower = _plain_pair(0.1 - 1j * (omega0 / 2 - eps), period=math.pi, residual=1e-10)
    spec = F.canonicalize_spectrum([upper, lower], omega0)
    assert len(spec.canonical_strip) == 1
    assert spec.canonical_strip[0].residual == 1e-12  # best copy kept
