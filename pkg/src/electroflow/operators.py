"""Fourier-multiplier operators on the periodic grid.

Every nonlocal operator used by the periodic model is diagonal in Fourier
space: the fractional dissipation |k|^s, the Riesz transform i*k/|k|, the
Leray projection, the heat semigroup exp(-t|k|^2), Gevrey weights
exp(tau*|k|^s), and the damped inverse built from the heat-integral
regularization of 1/|k|.

Multiplier tables are cached per (grid, spec); tables are frozen after
construction so concurrent readers always observe a complete table.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .spectral import SpectralField, TorusGrid, VectorSpectralField

SQRT_PI = float(np.sqrt(np.pi))


class GevreyOverflowError(OverflowError):
    """A Gevrey weight amplified some coefficient beyond the floating range.

    Raised instead of saturating: a clipped Gevrey norm would silently
    corrupt any radius fit downstream.
    """


@dataclass(frozen=True)
class MultiplierSpec:
    """Description of a scalar multiplier table.

    kind is one of 'fractional_laplacian', 'inverse_lambda_eps', 'heat',
    'gevrey'; the Riesz components and the Leray projection are handled by
    dedicated functions because they are not radial.
    """

    kind: str
    params: tuple[float, ...] = ()

    def build(self, grid: TorusGrid) -> np.ndarray:
        kmag = grid.kmag
        safe = np.where(kmag > 0, kmag, 1.0)
        if self.kind == "fractional_laplacian":
            (s,) = self.params
            table = np.where(kmag > 0, safe**s, 0.0)
        elif self.kind == "inverse_lambda_eps":
            eps, normalized = self.params
            table = np.where(kmag > 0, erfc(safe * np.sqrt(eps)) / safe, 0.0)
            if not normalized:
                table = table * SQRT_PI
        elif self.kind == "heat":
            (t,) = self.params
            table = np.exp(-t * grid.k2)
            table = np.where(kmag > 0, table, 0.0)
        elif self.kind == "gevrey":
            tau, s = self.params
            with np.errstate(over="raise"):
                try:
                    table = np.where(kmag > 0, np.exp(tau * safe**s), 0.0)
                except FloatingPointError as exc:
                    raise GevreyOverflowError(
                        f"exp({tau} * |k|^{s}) overflows at |k| <= {grid.kmax}"
                    ) from exc
        else:
            raise ValueError(f"unknown multiplier kind {self.kind!r}")
        table.setflags(write=False)
        return table


_TABLE_CACHE: dict[tuple[int, float, MultiplierSpec], np.ndarray] = {}
_TABLE_LOCK = threading.Lock()


def multiplier_table(grid: TorusGrid, spec: MultiplierSpec) -> np.ndarray:
    key = (grid.n, grid.dealias_fraction, spec)
    table = _TABLE_CACHE.get(key)
    if table is None:
        table = spec.build(grid)
        with _TABLE_LOCK:
            _TABLE_CACHE.setdefault(key, table)
    return table


def fractional_laplacian(f: SpectralField, s: float) -> SpectralField:
    """Lambda^s: multiply each coefficient by |k|^s (k = 0 stays zero).

    Negative s is fine because the mean-zero contract excludes k = 0.
    """
    return f.apply_multiplier(multiplier_table(f.grid, MultiplierSpec("fractional_laplacian", (float(s),))))


def riesz_transform(f: SpectralField) -> VectorSpectralField:
    """R = grad Lambda^{-1}: component j has symbol i*k_j/|k|.

    Mode-by-mode an isometry on mean-zero fields, and the output satisfies
    div(Rf) = Lambda f.
    """
    g = f.grid
    safe = np.where(g.kmag > 0, g.kmag, 1.0)
    c1 = np.where(g.kmag > 0, 1j * g.kx / safe, 0.0) * f.coeffs
    c2 = np.where(g.kmag > 0, 1j * g.ky / safe, 0.0) * f.coeffs
    return VectorSpectralField(SpectralField._wrap(g, c1), SpectralField._wrap(g, c2),
                               check_divergence=False)


def riesz_transform_eps(f: SpectralField, eps: float, normalized: bool = True) -> VectorSpectralField:
    """Damped Riesz transform grad (Lambda^{-1})_eps; equals R at eps = 0."""
    if eps == 0.0:
        return riesz_transform(f)
    g = f.grid
    damp = multiplier_table(g, MultiplierSpec("inverse_lambda_eps", (float(eps), bool(normalized))))
    c1 = 1j * g.kx * damp * f.coeffs
    c2 = 1j * g.ky * damp * f.coeffs
    return VectorSpectralField(SpectralField._wrap(g, c1), SpectralField._wrap(g, c2),
                               check_divergence=False)


def leray_project(v1: SpectralField, v2: SpectralField) -> VectorSpectralField:
    """Remove the gradient part: v - k (k.v)/|k|^2 per mode; idempotent."""
    g = v1.grid
    k2safe = np.where(g.k2 > 0, g.k2, 1.0)
    kdot = (g.kx * v1.coeffs + g.ky * v2.coeffs) / k2safe
    c1 = v1.coeffs - g.kx * kdot
    c2 = v2.coeffs - g.ky * kdot
    c1[0, 0] = 0.0
    c2[0, 0] = 0.0
    return VectorSpectralField(SpectralField._wrap(g, c1), SpectralField._wrap(g, c2))


def inverse_lambda_eps(f: SpectralField, eps: float, normalized: bool = True) -> SpectralField:
    """Heat-integral regularization of Lambda^{-1}.

    The damped inverse integrates the heat semigroup from eps upward, which
    per mode evaluates to the upper incomplete gamma of order 1/2, i.e.
    erfc(|k| sqrt(eps)) / |k| after dividing by Gamma(1/2). With the
    normalization (default) eps = 0 reproduces Lambda^{-1} exactly and the
    damping inequality holds with constant 1; ``normalized=False`` keeps
    the bare integral (an extra factor sqrt(pi)) for literal comparisons.
    """
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    return f.apply_multiplier(
        multiplier_table(f.grid, MultiplierSpec("inverse_lambda_eps", (float(eps), bool(normalized))))
    )


def heat_semigroup_periodic(f: SpectralField, t: float) -> SpectralField:
    """exp(t*Laplacian) on the torus: coefficient times exp(-t|k|^2)."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    return f.apply_multiplier(multiplier_table(f.grid, MultiplierSpec("heat", (float(t),))))


def gevrey_weight(f: SpectralField, tau: float, s: float) -> SpectralField:
    """exp(tau * Lambda^s): coefficient times exp(tau*|k|^s).

    Raises GevreyOverflowError if any amplified coefficient leaves the
    floating range (never clips).
    """
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    if s <= 0:
        raise ValueError(f"s must be > 0, got {s}")
    out = f.apply_multiplier(multiplier_table(f.grid, MultiplierSpec("gevrey", (float(tau), float(s)))))
    if not np.all(np.isfinite(out.coeffs)):
        raise GevreyOverflowError("Gevrey weight produced non-finite coefficients")
    return out
