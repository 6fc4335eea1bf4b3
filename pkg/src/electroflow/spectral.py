"""Torus grids, Fourier-coefficient field containers, and transforms.

Everything downstream works on the square torus [0, 2*pi]^2 with integer
wavenumbers, so coefficients are stored in the standard FFT layout
(np.fft.fftfreq order) and normalized such that

    f(x) = sum_k coeffs[k] * exp(i k . x).

All fields are mean-zero by construction (the k = 0 coefficient is pinned
to zero) and Hermitian-symmetric so the physical field is real. Field
objects are immutable values: the backing arrays are frozen and every
operation returns a new field.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi

# Relative tolerances for the construction-time contracts.
HERMITIAN_RTOL = 1e-10
MEAN_RTOL = 1e-10


class SymmetryError(ValueError):
    """Coefficient array is not Hermitian-symmetric within tolerance."""


class GridError(ValueError):
    """Invalid grid parameters or a grid/array mismatch."""


_GRID_CACHE: dict[tuple[int, float], "TorusGrid"] = {}


class TorusGrid:
    """Uniform n x n collocation grid on the torus [0, 2*pi]^2.

    Wavenumbers run over the signed integers of the FFT layout; radial
    multipliers only ever see |k|, so the labeling of the Nyquist line is
    immaterial (it is outside the dealias block anyway).

    Parameters
    ----------
    n : int
        Modes (and collocation points) per axis. Must be even and >= 8.
    dealias_fraction : float
        Fraction of the Nyquist wavenumber retained by :func:`dealias`.
        The default 2/3 is the standard rule for quadratic products.
    """

    def __init__(self, n: int, dealias_fraction: float = 2.0 / 3.0):
        if n < 8 or n % 2 != 0:
            raise GridError(f"grid size must be even and >= 8, got {n}")
        if not 0.0 < dealias_fraction <= 1.0:
            raise GridError(f"dealias_fraction must be in (0, 1], got {dealias_fraction}")
        self.n = int(n)
        self.dealias_fraction = float(dealias_fraction)

        k1 = np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)
        self.kx = k1[:, None] * np.ones((1, self.n), dtype=np.int64)
        self.ky = np.ones((self.n, 1), dtype=np.int64) * k1[None, :]
        self.k2 = (self.kx**2 + self.ky**2).astype(np.float64)
        self.kmag = np.sqrt(self.k2)

        # Retained block |k_i| <= kmax; floor keeps the block alias-free
        # for quadratic products (3*kmax <= n - 1 for every even n >= 8).
        self.kmax = int(np.floor(self.dealias_fraction * self.n / 2.0))
        self.dealias_mask = (np.abs(self.kx) <= self.kmax) & (np.abs(self.ky) <= self.kmax)

        coords = np.arange(self.n) * (TWO_PI / self.n)
        self.x = coords[:, None] * np.ones((1, self.n))
        self.y = np.ones((self.n, 1)) * coords[None, :]

        for arr in (self.kx, self.ky, self.k2, self.kmag, self.dealias_mask, self.x, self.y):
            arr.setflags(write=False)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TorusGrid)
            and self.n == other.n
            and self.dealias_fraction == other.dealias_fraction
        )

    def __hash__(self) -> int:
        return hash((self.n, self.dealias_fraction))

    def __repr__(self) -> str:
        return f"TorusGrid(n={self.n}, dealias_fraction={self.dealias_fraction:.6g})"


def get_grid(n: int, dealias_fraction: float = 2.0 / 3.0) -> TorusGrid:
    """Shared grid instances so multiplier tables can be cached per grid."""
    key = (int(n), float(dealias_fraction))
    grid = _GRID_CACHE.get(key)
    if grid is None:
        grid = TorusGrid(*key)
        _GRID_CACHE[key] = grid
    return grid


def _conjugate_reflection(coeffs: np.ndarray) -> np.ndarray:
    """coeffs evaluated at -k (mod n), conjugated."""
    n = coeffs.shape[0]
    idx = (-np.arange(n)) % n
    return np.conj(coeffs[np.ix_(idx, idx)])


def _check_coeffs(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    if coeffs.shape != (grid.n, grid.n):
        raise GridError(f"coefficient array shape {coeffs.shape} does not match grid n={grid.n}")
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    scale = np.max(np.abs(coeffs))
    if scale > 0.0:
        if abs(coeffs[0, 0]) > MEAN_RTOL * scale:
            raise GridError("k = 0 coefficient must be zero (mean-zero contract)")
        err = np.max(np.abs(coeffs - _conjugate_reflection(coeffs)))
        if err > HERMITIAN_RTOL * scale:
            raise SymmetryError(f"Hermitian symmetry violated: max deviation {err:.3e} vs scale {scale:.3e}")
    out = coeffs.copy()
    out[0, 0] = 0.0
    return out


class SpectralField:
    """Mean-zero scalar field on the torus, stored as Fourier coefficients."""

    __slots__ = ("grid", "coeffs")

    def __init__(self, grid: TorusGrid, coeffs: np.ndarray):
        self.grid = grid
        checked = _check_coeffs(grid, coeffs)
        checked.setflags(write=False)
        self.coeffs = checked

    @classmethod
    def _wrap(cls, grid: TorusGrid, coeffs: np.ndarray) -> "SpectralField":
        """Fast path for internal ops that preserve the invariants."""
        out = object.__new__(cls)
        out.grid = grid
        coeffs.setflags(write=False)
        out.coeffs = coeffs
        return out

    @classmethod
    def zeros(cls, grid: TorusGrid) -> "SpectralField":
        return cls._wrap(grid, np.zeros((grid.n, grid.n), dtype=np.complex128))

    @classmethod
    def from_modes(cls, grid: TorusGrid, modes: dict[tuple[int, int], complex],
                   symmetrize: bool = True) -> "SpectralField":
        """Build a field from a sparse {(kx, ky): amplitude} dictionary.

        With ``symmetrize`` the conjugate at -k is filled in automatically
        whenever it is not given explicitly, so single-entry dictionaries
        produce real fields.
        """
        coeffs = np.zeros((grid.n, grid.n), dtype=np.complex128)
        for (p, q), amp in modes.items():
            coeffs[p % grid.n, q % grid.n] = amp
        if symmetrize:
            for (p, q), amp in modes.items():
                if ((-p) % grid.n, (-q) % grid.n) not in {(a % grid.n, b % grid.n) for a, b in modes}:
                    coeffs[(-p) % grid.n, (-q) % grid.n] = np.conj(amp)
        return cls(grid, coeffs)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField._wrap(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField._wrap(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField._wrap(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def apply_multiplier(self, table: np.ndarray) -> "SpectralField":
        out = self.coeffs * table
        out[0, 0] = 0.0
        return SpectralField._wrap(self.grid, out)

    def __repr__(self) -> str:
        return f"SpectralField(n={self.grid.n}, l2={l2_norm(self):.6g})"


@dataclass(frozen=True)
class VectorSpectralField:
    """Pair of spectral fields; velocity fields are divergence-free.

    The divergence check is on by default (velocities must satisfy
    k . u(k) = 0 to round-off) but can be skipped for pairs that are not
    velocities, e.g. the Riesz transform of a scalar, whose divergence is
    the fractional operator applied to it.
    """

    u1: SpectralField
    u2: SpectralField
    check_divergence: bool = True

    def __post_init__(self):
        if self.u1.grid != self.u2.grid:
            raise GridError("vector components live on different grids")
        if self.check_divergence:
            div = self.divergence_defect()
            scale = max(np.max(np.abs(self.u1.coeffs)), np.max(np.abs(self.u2.coeffs)))
            if scale > 0.0 and div > 1e-10 * scale * self.grid.n:
                raise GridError(f"velocity is not divergence-free: max |k.u| = {div:.3e}")

    def divergence_defect(self) -> float:
        g = self.grid
        return float(np.max(np.abs(g.kx * self.u1.coeffs + g.ky * self.u2.coeffs)))

    @property
    def grid(self) -> TorusGrid:
        return self.u1.grid

    @classmethod
    def zeros(cls, grid: TorusGrid) -> "VectorSpectralField":
        return cls(SpectralField.zeros(grid), SpectralField.zeros(grid))

    def __add__(self, other: "VectorSpectralField") -> "VectorSpectralField":
        return VectorSpectralField(self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other: "VectorSpectralField") -> "VectorSpectralField":
        return VectorSpectralField(self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, scalar: float) -> "VectorSpectralField":
        return VectorSpectralField(self.u1 * scalar, self.u2 * scalar)

    __rmul__ = __mul__


def forward_transform(grid: TorusGrid, samples: np.ndarray) -> SpectralField:
    """Real grid samples -> mean-zero spectral field.

    The grid mean is subtracted before pinning k = 0 to zero, so constant
    fields map to the zero field.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape != (grid.n, grid.n):
        raise GridError(f"sample array shape {samples.shape} does not match grid n={grid.n}")
    coeffs = np.fft.fft2(samples) / grid.n**2
    coeffs[0, 0] = 0.0
    return SpectralField._wrap(grid, coeffs)


def inverse_transform(f: SpectralField) -> np.ndarray:
    """Spectral field -> real grid samples.

    The imaginary residue left by round-off is discarded after checking it
    is small relative to the field magnitude; a genuine symmetry violation
    raises instead of silently returning garbage.
    """
    samples = np.fft.ifft2(f.coeffs) * f.grid.n**2
    scale = np.max(np.abs(samples))
    imag = np.max(np.abs(samples.imag))
    if scale > 0.0 and imag > 1e-10 * scale:
        raise SymmetryError(f"inverse transform has imaginary residue {imag:.3e} vs scale {scale:.3e}")
    out = samples.real
    out.setflags(write=False)
    return out


def dealias(f: SpectralField) -> SpectralField:
    """Zero every mode outside the retained 2/3 block; idempotent."""
    return SpectralField._wrap(f.grid, np.where(f.grid.dealias_mask, f.coeffs, 0.0))


def dealias_vector(v: VectorSpectralField) -> VectorSpectralField:
    return VectorSpectralField(dealias(v.u1), dealias(v.u2))


# ---------------------------------------------------------------------------
# Norms and inner products (Parseval on the (2*pi)^2 box).
# ---------------------------------------------------------------------------

def l2_norm(f: SpectralField) -> float:
    """L^2 norm over [0, 2*pi]^2: ||f|| = 2*pi * sqrt(sum |f_k|^2)."""
    return TWO_PI * float(np.sqrt(np.sum(np.abs(f.coeffs) ** 2)))

def hs_norm(f: SpectralField, s: float) -> float:
    """Homogeneous fractional norm ||Lambda^s f||_{L^2}."""
    w = np.where(f.grid.k2 > 0, f.grid.k2 ** s, 0.0)
    return TWO_PI * float(np.sqrt(np.sum(w * np.abs(f.coeffs) ** 2)))

def l2_norm_vec(v: VectorSpectralField) -> float:
    return float(np.hypot(l2_norm(v.u1), l2_norm(v.u2)))

def hs_norm_vec(v: VectorSpectralField, s: float) -> float:
    return float(np.hypot(hs_norm(v.u1, s), hs_norm(v.u2, s)))

def inner_l2(f: SpectralField, g: SpectralField) -> float:
    """(f, g)_{L^2} for real fields, computed spectrally."""
    return TWO_PI**2 * float(np.real(np.vdot(g.coeffs, f.coeffs)))

def inner_l2_vec(v: VectorSpectralField, w: VectorSpectralField) -> float:
    return inner_l2(v.u1, w.u1) + inner_l2(v.u2, w.u2)


# ---------------------------------------------------------------------------
# Random band-limited fields.
# ---------------------------------------------------------------------------

def random_field(grid: TorusGrid, seed: int, slope: float = 3.0,
                 amplitude: float = 1.0, rng: np.random.Generator | None = None) -> SpectralField:
    """Random smooth field: |k|^(-slope) spectrum with random phases.

    Hermitian-symmetrized, dealiased, and rescaled so the L^2 norm equals
    ``amplitude``. Deterministic for a given seed.
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, TWO_PI, size=(grid.n, grid.n))
    k2safe = np.where(grid.k2 > 0, grid.k2, 1.0)
    amp = np.where(grid.k2 > 0, k2safe ** (-slope / 2.0), 0.0)
    raw = amp * np.exp(1j * phases)
    raw = 0.5 * (raw + _conjugate_reflection(raw))
    raw[0, 0] = 0.0
    raw = np.where(grid.dealias_mask, raw, 0.0)
    f = SpectralField._wrap(grid, raw)
    nrm = l2_norm(f)
    if nrm == 0.0:
        return f
    return f * (amplitude / nrm)


def gevrey_field(grid: TorusGrid, seed: int, tau: float, s: float,
                 amplitude: float = 1.0) -> SpectralField:
    """Random analytic field with exp(-tau * |k|^s) coefficient envelope."""
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, TWO_PI, size=(grid.n, grid.n))
    ksafe = np.where(grid.kmag > 0, grid.kmag, 1.0)
    amp = np.where(grid.k2 > 0, np.exp(-tau * ksafe**s) / ksafe, 0.0)
    raw = amp * np.exp(1j * phases)
    raw = 0.5 * (raw + _conjugate_reflection(raw))
    raw[0, 0] = 0.0
    raw = np.where(grid.dealias_mask, raw, 0.0)
    f = SpectralField._wrap(grid, raw)
    nrm = l2_norm(f)
    return f * (amplitude / nrm) if nrm > 0 else f
