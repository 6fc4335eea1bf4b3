"""Dirichlet eigenfunction operators, kernel identities, and the
convex-damping / nonlinear Poincare validators."""

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gamma

from electroflow import dirichlet as dh


@pytest.fixture(scope="module")
def basis2d():
    return dh.SineBasis(64)


@pytest.fixture(scope="module")
def basis1d():
    return dh.IntervalBasis(32)


# -- coefficientwise operators ----------------------------------------------

def test_lambda_s_eigenfunction(basis2d):
    w11 = dh.SineField.eigenfunction(basis2d, 1, 1)
    out = dh.lambda_s_apply(w11, 1.0)
    assert abs(out.coeffs[0, 0] - np.sqrt(2.0)) < 1e-15
    out2 = dh.lambda_s_apply(w11, 2.0)
    assert abs(out2.coeffs[0, 0] - 2.0) < 1e-15  # equals -Lap w11


def test_lambda_s_inverse_composition(basis2d):
    f = dh.SineField.random_bandlimited(basis2d, band=16, seed=1)
    back = dh.lambda_s_apply(dh.lambda_s_apply(f, 0.8), -0.8)
    assert np.max(np.abs(back.coeffs - f.coeffs)) < 1e-13


def test_heat_semigroup_eigenfunction(basis2d):
    w11 = dh.SineField.eigenfunction(basis2d, 1, 1)
    out = dh.heat_semigroup(w11, 0.5)
    assert abs(out.coeffs[0, 0] - np.exp(-1.0)) < 1e-15
    ident = dh.heat_semigroup(w11, 0.0)
    assert np.array_equal(ident.coeffs, w11.coeffs)


def test_heat_semigroup_property(basis2d):
    f = dh.SineField.random_bandlimited(basis2d, band=16, seed=2)
    a = dh.heat_semigroup(dh.heat_semigroup(f, 0.2), 0.3)
    b = dh.heat_semigroup(f, 0.5)
    assert np.max(np.abs(a.coeffs - b.coeffs)) < 1e-13


def test_inverse_lambda_eps_eigenfunction(basis2d):
    w11 = dh.SineField.eigenfunction(basis2d, 1, 1)
    out = dh.inverse_lambda_eps_dirichlet(w11, 0.0)
    assert abs(out.coeffs[0, 0] - 2.0 ** -0.5) < 1e-15


def test_inverse_lambda_eps_quadrature_oracle(basis2d):
    # lambda = 2, eps = 0.5: erfc(1)/sqrt(2) against the defining integral
    w11 = dh.SineField.eigenfunction(basis2d, 1, 1)
    out = dh.inverse_lambda_eps_dirichlet(w11, 0.5)
    oracle, _ = quad(lambda t: t**-0.5 * np.exp(-2.0 * t), 0.5, np.inf)
    oracle /= np.sqrt(np.pi)
    assert abs(out.coeffs[0, 0] - oracle) < 1e-12
    assert abs(oracle - 0.111228) < 1e-6


def test_damping_inequality_dirichlet(basis2d):
    f = dh.SineField.random_bandlimited(basis2d, band=32, seed=3)
    for s in (0.0, 0.5, 1.0, 1.5):
        for eps in (0.0, 1e-3, 1e-1):
            lhs = dh.hs_norm_dirichlet(dh.inverse_lambda_eps_dirichlet(f, eps), s)
            rhs = dh.hs_norm_dirichlet(f, s - 1.0)
            assert lhs <= rhs * (1.0 + 1e-14)
            if eps == 0.0:
                assert abs(lhs - rhs) < 1e-14 * rhs


def test_linear_decay_exactness(basis2d):
    # d/dt q + Lambda^alpha q = 0 from w11: coefficient factor exp(-t 2^(a/2))
    for alpha in (0.25, 0.5, 1.0):
        w11 = dh.SineField.eigenfunction(basis2d, 1, 1)
        t = 0.37
        out = dh.fractional_heat(w11, t, alpha)
        assert out.coeffs[0, 0] == np.exp(-t * 2.0 ** (alpha / 2.0))


# -- calibration constant ---------------------------------------------------

@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_c2s_matches_closed_form(s):
    assert abs(dh.c2s_constant(s) - s / gamma(1.0 - s)) < 1e-12


# -- heat kernel ------------------------------------------------------------

def test_heat_kernel_symmetry_and_positivity():
    hk = dh.heat_kernel_interval(dh.IntervalBasis(700), 1e-3, g=96)
    assert hk.symmetry_defect() < 1e-12
    assert hk.min_value() > -1e-12


def test_heat_kernel_refusal():
    with pytest.raises(dh.KernelResolutionError):
        dh.heat_kernel_interval(dh.IntervalBasis(700), 5e-5)
    with pytest.raises(dh.KernelResolutionError):
        dh.heat_kernel_interval(dh.IntervalBasis(10), 1e-3)  # basis too small


def test_kernel_positivity_and_envelope():
    spec = dh.QuadratureSpec(space_points=128, t_points=96)
    for s in (0.25, 0.5, 0.75):
        x, k_mat, b_vec = dh.interval_kernels(s, spec)
        assert np.min(b_vec) > -1e-10
        assert np.min(k_mat) > -1e-10
        i, j = np.triu_indices(len(x), k=3)
        r = np.abs(x[i] - x[j])
        fitted_c = float(np.max(k_mat[i, j] * r ** (1.0 + 2.0 * s)))
        assert np.isfinite(fitted_c) and fitted_c > 0


# -- quadratic-form identity ------------------------------------------------

def test_identity_zero_field(basis1d):
    zero = dh.IntervalField(basis1d, np.zeros(basis1d.m_max))
    assert dh.quadratic_form_identity_residual(zero, 0.5) == 0.0


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
@pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
def test_identity_eigenfunctions(basis1d, s, m):
    psi = dh.IntervalField.eigenfunction(basis1d, m)
    assert dh.quadratic_form_identity_residual(psi, s) < 5e-3


def test_identity_refinement_reduces_residual(basis1d):
    psi = dh.IntervalField.eigenfunction(basis1d, 3)
    spec = dh.QuadratureSpec(space_points=256, t_points=96)
    res = dh.refined_residuals(psi, 0.5, spec, levels=2)
    assert res[1] < res[0]


def test_identity_2d_coarse(basis1d):
    psi = dh.SineField.eigenfunction(dh.SineBasis(8), 1, 1)
    spec = dh.QuadratureSpec(space_points=16, t_points=128)
    assert dh.quadratic_form_identity_residual(psi, 0.5, spec) < 0.1


def test_identity_rejects_fine_2d():
    psi = dh.SineField.eigenfunction(dh.SineBasis(8), 1, 1)
    with pytest.raises(ValueError):
        dh.quadratic_form_identity_residual(psi, 0.5, dh.QuadratureSpec(space_points=64))


# -- convex damping gap -----------------------------------------------------

def test_cordoba_gap_eigenfunction(basis2d):
    w11 = dh.SineField.eigenfunction(basis2d, 1, 1)
    assert dh.cordoba_gap(w11, 1.0, 2) >= -1e-6


def test_cordoba_gap_zero_field(basis2d):
    zero = dh.SineField(basis2d, np.zeros((64, 64)))
    gap = dh.cordoba_gap(zero, 1.0, 2)
    assert gap == 0.0


def test_cordoba_gap_homogeneity(basis2d):
    w11 = dh.SineField.eigenfunction(basis2d, 1, 1)
    g1 = dh.cordoba_gap(w11, 1.0, 2)
    g3 = dh.cordoba_gap(dh.SineField(basis2d, 3.0 * w11.coeffs), 1.0, 2)
    assert abs(g3 - 9.0 * g1) < 1e-10 * max(abs(g3), 1.0)


def test_cordoba_band_limit_guard(basis2d):
    # nearly-full-band field: f^4 spills far beyond the basis
    f = dh.SineField.random_bandlimited(basis2d, band=60, seed=4, amplitude=3.0)
    with pytest.raises(dh.BandLimitError):
        dh.cordoba_gap(f, 0.5, 4)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("s,p", [(0.5, 2), (1.0, 4)])
def test_cordoba_gap_random_fields(basis2d, seed, s, p):
    f = dh.SineField.random_bandlimited(basis2d, band=8, seed=seed)
    assert dh.cordoba_gap(f, s, p) >= -1e-6


# -- nonlinear Poincare -----------------------------------------------------

def test_poincare_eigenfunction_p2(basis2d):
    w11 = dh.SineField.eigenfunction(basis2d, 1, 1)
    assert abs(dh.nonlinear_poincare_lhs(w11, 1.0, 2) - np.sqrt(2.0)) < 1e-10


def test_poincare_eigenfunction_p4(basis2d):
    # integral w^4 = 9/(4 pi^2) for the normalized first eigenfunction
    w11 = dh.SineField.eigenfunction(basis2d, 1, 1)
    expect = np.sqrt(2.0) * 9.0 / (4.0 * np.pi**2)
    assert abs(dh.nonlinear_poincare_lhs(w11, 1.0, 4) - expect) < 1e-8


def test_poincare_zero_field(basis2d):
    zero = dh.SineField(basis2d, np.zeros((64, 64)))
    assert dh.nonlinear_poincare_lhs(zero, 1.0, 2) == 0.0


def test_poincare_positive_on_random_fields(basis2d):
    for seed in range(5):
        f = dh.SineField.random_bandlimited(basis2d, band=8, seed=seed)
        for s, p in ((0.5, 2), (1.0, 4)):
            assert dh.nonlinear_poincare_lhs(f, s, p) > 0


# -- basis sanity -----------------------------------------------------------

def test_gram_matrix_orthonormal():
    g = dh.gram_matrix(dh.SineBasis(6), g=128)
    assert np.max(np.abs(g - np.eye(36))) < 1e-12


def test_eigenvalues_sorted_ascending(basis2d):
    lam = basis2d.eigenvalues_sorted()
    assert lam[0] == 2.0
    assert np.all(np.diff(lam) >= 0)
