"""Grid, transform, and dealiasing contracts."""

import numpy as np
import pytest

from electroflow import spectral as sp
from electroflow.spectral import (GridError, SpectralField, SymmetryError,
                                  dealias, forward_transform, get_grid,
                                  inverse_transform)


@pytest.fixture
def grid16():
    return get_grid(16)


def test_grid_validation():
    with pytest.raises(GridError):
        sp.TorusGrid(6)
    with pytest.raises(GridError):
        sp.TorusGrid(15)
    g = sp.TorusGrid(8)
    assert g.kmax == 2


def test_forward_single_mode(grid16):
    f = forward_transform(grid16, np.cos(grid16.x))
    assert abs(f.coeffs[1, 0] - 0.5) < 1e-14
    assert abs(f.coeffs[-1, 0] - 0.5) < 1e-14
    other = np.abs(f.coeffs).sum() - np.abs(f.coeffs[1, 0]) - np.abs(f.coeffs[-1, 0])
    assert other < 1e-13


def test_constant_field_maps_to_zero(grid16):
    f = forward_transform(grid16, np.full((16, 16), 5.0))
    assert np.all(f.coeffs == 0)


def test_round_trip_random_smooth(grid16):
    rng = np.random.default_rng(0)
    f = sp.random_field(grid16, 1, slope=2.0, amplitude=2.0, rng=rng)
    samples = inverse_transform(f)
    back = forward_transform(grid16, samples)
    assert np.max(np.abs(back.coeffs - f.coeffs)) < 1e-13
    # raw samples round trip up to the mean
    raw = samples + 3.7
    again = inverse_transform(forward_transform(grid16, raw))
    assert np.max(np.abs(again - (raw - raw.mean()))) < 1e-12


def test_forward_dimension_mismatch(grid16):
    with pytest.raises(GridError):
        forward_transform(grid16, np.zeros((8, 8)))


def test_inverse_single_mode_is_cosine(grid16):
    f = SpectralField.from_modes(grid16, {(1, 0): 0.5})
    assert np.max(np.abs(inverse_transform(f) - np.cos(grid16.x))) < 1e-14


def test_inverse_zero_field(grid16):
    assert np.all(inverse_transform(SpectralField.zeros(grid16)) == 0)


def test_inverse_matches_direct_summation(grid16):
    # three random Hermitian-symmetric modes against direct trig summation
    rng = np.random.default_rng(7)
    modes = {(1, 2): complex(*rng.normal(size=2)),
             (3, -1): complex(*rng.normal(size=2)),
             (0, 4): complex(*rng.normal(size=2))}
    f = SpectralField.from_modes(grid16, modes)
    direct = np.zeros((16, 16))
    for (p, q), amp in modes.items():
        direct += 2.0 * (amp.real * np.cos(p * grid16.x + q * grid16.y)
                         - amp.imag * np.sin(p * grid16.x + q * grid16.y))
    assert np.max(np.abs(inverse_transform(f) - direct)) < 1e-12


def test_symmetry_violation_rejected(grid16):
    coeffs = np.zeros((16, 16), dtype=complex)
    coeffs[1, 0] = 1.0  # conjugate partner missing
    with pytest.raises(SymmetryError):
        SpectralField(grid16, coeffs)


def test_mean_zero_contract_rejected(grid16):
    coeffs = np.zeros((16, 16), dtype=complex)
    coeffs[0, 0] = 1.0
    with pytest.raises(GridError):
        SpectralField(grid16, coeffs)


def test_dealias_threshold_arithmetic(grid16):
    # n=16: keep |k| <= floor((2/3)*8) = 5
    f = SpectralField.from_modes(grid16, {(6, 0): 1.0, (5, 0): 1.0})
    d = dealias(f)
    assert d.coeffs[6, 0] == 0
    assert d.coeffs[5, 0] == 1.0


def test_dealias_idempotent_and_contractive(grid16):
    rng = np.random.default_rng(3)
    samples = rng.standard_normal((16, 16))
    f = forward_transform(grid16, samples)
    d1 = dealias(f)
    d2 = dealias(d1)
    assert np.array_equal(d1.coeffs, d2.coeffs)
    assert sp.l2_norm(d1) <= sp.l2_norm(f)


def test_parseval_vs_grid_quadrature(grid16):
    rng = np.random.default_rng(5)
    f = sp.random_field(grid16, 2, slope=1.5, amplitude=3.0, rng=rng)
    samples = inverse_transform(f)
    coeff_sum = float(np.sum(np.abs(f.coeffs) ** 2))
    quadrature = float(np.mean(samples**2))  # (2pi)^-2 * integral
    assert abs(coeff_sum - quadrature) < 1e-10 * max(coeff_sum, 1e-30)


def test_l2_norm_of_cosine(grid16):
    f = forward_transform(grid16, np.cos(grid16.x))
    assert abs(sp.l2_norm(f) - np.pi * np.sqrt(2.0)) < 1e-12


def test_vector_divergence_check(grid16):
    f1 = SpectralField.from_modes(grid16, {(1, 0): 1.0})
    f2 = SpectralField.zeros(grid16)
    with pytest.raises(GridError):
        sp.VectorSpectralField(f1, f2)  # k.(u) = kx != 0 at (1,0)
    sp.VectorSpectralField(f2, f1)  # u2 varying in x only: divergence-free


def test_random_field_determinism(grid16):
    a = sp.random_field(grid16, seed=9)
    b = sp.random_field(grid16, seed=9)
    assert np.array_equal(a.coeffs, b.coeffs)
    c = sp.random_field(grid16, seed=10)
    assert not np.array_equal(a.coeffs, c.coeffs)


def test_fields_are_immutable(grid16):
    f = sp.random_field(grid16, seed=1)
    with pytest.raises(ValueError):
        f.coeffs[1, 0] = 99.0
