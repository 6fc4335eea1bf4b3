"""Fourier-multiplier operator contracts and the damping inequality."""

import numpy as np
import pytest
from scipy.integrate import quad

from electroflow import operators as op
from electroflow import spectral as sp
from electroflow.spectral import SpectralField, get_grid


@pytest.fixture
def grid():
    return get_grid(32)


def rand(grid, seed, slope=2.0):
    return sp.random_field(grid, seed, slope=slope, amplitude=1.0)


# -- fractional laplacian ---------------------------------------------------

def test_fractional_laplacian_single_mode(grid):
    f = SpectralField.from_modes(grid, {(3, 4): 1.0})
    assert abs(op.fractional_laplacian(f, 1.0).coeffs[3, 4] - 5.0) < 1e-14
    assert abs(op.fractional_laplacian(f, 0.5).coeffs[3, 4] - np.sqrt(5.0)) < 1e-14


def test_fractional_laplacian_s0_identity(grid):
    f = rand(grid, 1)
    assert np.max(np.abs(op.fractional_laplacian(f, 0.0).coeffs - f.coeffs)) == 0


def test_multiplier_composition_commutes(grid):
    f = rand(grid, 2)
    a = op.fractional_laplacian(op.fractional_laplacian(f, 0.7), -0.3)
    b = op.fractional_laplacian(f, 0.4)
    scale = np.max(np.abs(b.coeffs))
    assert np.max(np.abs(a.coeffs - b.coeffs)) < 1e-13 * scale


def test_negative_order_inverts(grid):
    f = rand(grid, 3)
    back = op.fractional_laplacian(op.fractional_laplacian(f, 1.3), -1.3)
    assert np.max(np.abs(back.coeffs - f.coeffs)) < 1e-13


# -- riesz transform --------------------------------------------------------

def test_riesz_axis_modes(grid):
    f = SpectralField.from_modes(grid, {(1, 0): 1.0})
    r = op.riesz_transform(f)
    assert abs(r.u1.coeffs[1, 0] - 1j) < 1e-14
    assert abs(r.u2.coeffs[1, 0]) < 1e-14
    g = SpectralField.from_modes(grid, {(0, 2): 1.0})
    r2 = op.riesz_transform(g)
    assert abs(r2.u1.coeffs[0, 2]) < 1e-14
    assert abs(r2.u2.coeffs[0, 2] - 1j) < 1e-14


def test_riesz_isometry(grid):
    f = rand(grid, 4)
    r = op.riesz_transform(f)
    assert abs(sp.l2_norm_vec(r) - sp.l2_norm(f)) < 1e-12


def test_riesz_divergence_identity(grid):
    # k . (Rf)^(k) = i |k| f^(k), i.e. div R = -Lambda in the usual sign.
    f = rand(grid, 5)
    r = op.riesz_transform(f)
    kdot = grid.kx * r.u1.coeffs + grid.ky * r.u2.coeffs
    expect = 1j * grid.kmag * f.coeffs
    assert np.max(np.abs(kdot - expect)) < 1e-13


# -- leray projection -------------------------------------------------------

def test_leray_kills_gradient_mode(grid):
    v1 = SpectralField.from_modes(grid, {(1, 0): 1.0})
    v2 = SpectralField.zeros(grid)
    p = op.leray_project(v1, v2)
    assert np.max(np.abs(p.u1.coeffs)) < 1e-15
    assert np.max(np.abs(p.u2.coeffs)) < 1e-15


def test_leray_keeps_solenoidal_mode(grid):
    v1 = SpectralField.zeros(grid)
    v2 = SpectralField.from_modes(grid, {(1, 0): 1.0})
    p = op.leray_project(v1, v2)
    assert np.max(np.abs(p.u2.coeffs - v2.coeffs)) < 1e-15


def test_leray_idempotent_and_divergence_free(grid):
    p = op.leray_project(rand(grid, 6), rand(grid, 7))
    pp = op.leray_project(p.u1, p.u2)
    assert np.max(np.abs(pp.u1.coeffs - p.u1.coeffs)) < 1e-14
    assert np.max(np.abs(pp.u2.coeffs - p.u2.coeffs)) < 1e-14
    assert p.divergence_defect() < 1e-14


# -- damped inverse ---------------------------------------------------------

def test_inverse_lambda_eps_zero_is_exact_inverse(grid):
    f = SpectralField.from_modes(grid, {(2, 0): 1.0})
    out = op.inverse_lambda_eps(f, 0.0)
    assert abs(out.coeffs[2, 0] - 0.5) < 1e-15


def test_inverse_lambda_eps_quadrature_oracle(grid):
    # multiplier at |k| = 2, eps = 0.25 against the defining heat integral
    f = SpectralField.from_modes(grid, {(2, 0): 1.0})
    out = op.inverse_lambda_eps(f, 0.25)
    oracle, err = quad(lambda t: t**-0.5 * np.exp(-4.0 * t), 0.25, np.inf)
    oracle /= np.sqrt(np.pi)
    assert err < 1e-9
    assert abs(out.coeffs[2, 0].real - oracle) < 1e-12
    assert abs(oracle - 0.0786496035) < 1e-9


def test_inverse_lambda_eps_monotone_damping(grid):
    f = rand(grid, 8)
    inv0 = op.inverse_lambda_eps(f, 0.0)
    for eps in (1e-3, 1e-1, 1.0):
        damped = op.inverse_lambda_eps(f, eps)
        assert np.all(np.abs(damped.coeffs) <= np.abs(inv0.coeffs) + 1e-16)


def test_unnormalized_variant_carries_sqrt_pi(grid):
    f = rand(grid, 9)
    a = op.inverse_lambda_eps(f, 0.01, normalized=True)
    b = op.inverse_lambda_eps(f, 0.01, normalized=False)
    assert np.max(np.abs(b.coeffs - np.sqrt(np.pi) * a.coeffs)) < 1e-13


@pytest.mark.parametrize("s", [0.0, 0.5, 1.0, 1.5])
@pytest.mark.parametrize("eps", [0.0, 1e-3, 1e-1])
def test_damping_inequality_normalized(grid, s, eps):
    # || Lambda^s (Lambda^-1)_eps f || <= || Lambda^(s-1) f ||, equality at eps=0
    f = rand(grid, 11)
    lhs = sp.l2_norm(op.fractional_laplacian(op.inverse_lambda_eps(f, eps), s))
    rhs = sp.l2_norm(op.fractional_laplacian(f, s - 1.0))
    assert lhs <= rhs * (1.0 + 1e-14)
    if eps == 0.0:
        assert abs(lhs - rhs) < 1e-14 * rhs


# -- gevrey weight ----------------------------------------------------------

def test_gevrey_tau0_identity(grid):
    f = rand(grid, 12)
    out = op.gevrey_weight(f, 0.0, 0.5)
    assert np.max(np.abs(out.coeffs - f.coeffs)) == 0


def test_gevrey_single_mode_arithmetic(grid):
    f = SpectralField.from_modes(grid, {(4, 0): 1.0})
    out = op.gevrey_weight(f, 1.0, 0.5)
    assert abs(out.coeffs[4, 0] - np.exp(2.0)) < 1e-13


def test_gevrey_semigroup(grid):
    f = rand(grid, 13)
    a = op.gevrey_weight(op.gevrey_weight(f, 0.3, 0.5), 0.2, 0.5)
    b = op.gevrey_weight(f, 0.5, 0.5)
    assert np.max(np.abs(a.coeffs - b.coeffs)) < 1e-13 * np.max(np.abs(b.coeffs))


def test_gevrey_overflow_reported(grid):
    f = rand(grid, 14)
    with pytest.raises(op.GevreyOverflowError):
        op.gevrey_weight(f, 1e5, 1.0)


def test_heat_semigroup_periodic(grid):
    f = SpectralField.from_modes(grid, {(1, 2): 1.0})
    out = op.heat_semigroup_periodic(f, 0.3)
    assert abs(out.coeffs[1, 2] - np.exp(-0.3 * 5.0)) < 1e-14
