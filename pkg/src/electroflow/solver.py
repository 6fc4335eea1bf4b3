"""Time integration of the coupled periodic system.

The state is (q, u): charge density plus divergence-free velocity. The
stiff diagonal terms (|k|^alpha on q, |k|^2 on u, plus eps*|k|^2 on q for
the regularized system) are integrated exactly with integrating factors;
the advective and electric nonlinearities are evaluated pseudo-spectrally
with 2/3 dealiasing and stepped with an explicit RK scheme (IFRK2 default,
IFRK4 available).

Internally a state travels as a stacked complex array z[0..2] =
(q_hat, u1_hat, u2_hat) so the integrating factors apply vectorized; the
State/field objects are the API boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral as sp
from .operators import leray_project, riesz_transform_eps
from .spectral import (SpectralField, TorusGrid, VectorSpectralField, dealias,
                       forward_transform, get_grid, inverse_transform)


class CFLError(RuntimeError):
    """Advective CFL guard violated: dt * max|u| * (n/2) > 0.5."""


class RankCollapseError(RuntimeError):
    """Tangent frame became numerically degenerate."""


@dataclass(frozen=True)
class State:
    """Solution snapshot: charge density, velocity, simulation clock."""

    q: SpectralField
    u: VectorSpectralField
    t: float = 0.0

    @property
    def grid(self) -> TorusGrid:
        return self.q.grid


@dataclass(frozen=True)
class ForcingSpec:
    """Time-independent body force and potential, given mode-by-mode.

    f_modes: {(kx, ky): (amp1, amp2)} divergence-free per mode;
    phi_modes: {(kx, ky): amp} for the potential. Conjugate modes are
    filled in automatically, and k = 0 entries are rejected (mean-zero).
    """

    f_modes: tuple[tuple[tuple[int, int], tuple[complex, complex]], ...] = ()
    phi_modes: tuple[tuple[tuple[int, int], complex], ...] = ()

    def __post_init__(self):
        for (p, q), (a1, a2) in self.f_modes:
            if p == 0 and q == 0:
                raise ValueError("forcing must be mean-zero: k = 0 mode not allowed")
            if abs(p * a1 + q * a2) > 1e-12 * max(abs(a1), abs(a2), 1e-300):
                raise ValueError(f"f mode {(p, q)} is not divergence-free: k.f = {p * a1 + q * a2}")
        for (p, q), _ in self.phi_modes:
            if p == 0 and q == 0:
                raise ValueError("potential must be mean-zero: k = 0 mode not allowed")

    def is_zero(self) -> bool:
        return not self.f_modes and not self.phi_modes

    def compile(self, grid: TorusGrid) -> "_CompiledForcing":
        f1 = SpectralField.from_modes(grid, {k: a[0] for k, a in self.f_modes})
        f2 = SpectralField.from_modes(grid, {k: a[1] for k, a in self.f_modes})
        phi = SpectralField.from_modes(grid, dict(self.phi_modes))
        lap_phi = phi.apply_multiplier(-grid.k2)
        gphi1 = inverse_transform(SpectralField._wrap(grid, 1j * grid.kx * phi.coeffs))
        gphi2 = inverse_transform(SpectralField._wrap(grid, 1j * grid.ky * phi.coeffs))
        return _CompiledForcing(
            f_hat=np.stack([f1.coeffs, f2.coeffs]),
            lap_phi_hat=lap_phi.coeffs,
            grad_phi_phys=np.stack([gphi1, gphi2]),
            trivial=self.is_zero(),
        )


@dataclass(frozen=True)
class _CompiledForcing:
    f_hat: np.ndarray
    lap_phi_hat: np.ndarray
    grad_phi_phys: np.ndarray
    trivial: bool


@dataclass(frozen=True)
class SolverConfig:
    """Numerical parameters of one simulation."""

    alpha: float
    dt: float
    n: int
    scheme: str = "IFRK2"
    epsilon: float = 0.0
    galerkin_n: int | None = None
    seed: int = 0
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.scheme not in ("IFRK2", "IFRK4"):
            raise ValueError(f"scheme must be IFRK2 or IFRK4, got {self.scheme!r}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        grid = self.grid  # validates n
        if self.galerkin_n is not None:
            if self.galerkin_n < 1:
                raise ValueError(f"galerkin_n must be >= 1, got {self.galerkin_n}")
            kcut = _galerkin_cutoff(grid, self.galerkin_n)
            if np.sqrt(kcut) > grid.kmax:
                raise ValueError(
                    f"galerkin_n={self.galerkin_n} retains |k|^2 up to {kcut:.0f}, outside the "
                    f"dealias block |k| <= {grid.kmax} of n={self.n}")

    @property
    def grid(self) -> TorusGrid:
        return get_grid(self.n, self.dealias_fraction)


# ---------------------------------------------------------------------------
# Galerkin truncation.
# ---------------------------------------------------------------------------

def _galerkin_cutoff(grid: TorusGrid, n_g: int) -> float:
    """|k|^2 value of the n_g-th smallest eigenvalue (ties included)."""
    eigs = np.sort(grid.k2[grid.k2 > 0].ravel())
    if n_g > eigs.size:
        return float(eigs[-1])
    return float(eigs[n_g - 1])


def galerkin_mask(grid: TorusGrid, n_g: int | None) -> np.ndarray:
    if n_g is None:
        return grid.dealias_mask
    kcut = _galerkin_cutoff(grid, n_g)
    return (grid.k2 <= kcut) & (grid.k2 > 0)


def galerkin_truncate(state: State, n_g: int) -> State:
    """Project onto the n_g lowest eigenvalue shells (whole shells kept)."""
    mask = galerkin_mask(state.grid, n_g)
    trunc = lambda f: SpectralField._wrap(f.grid, np.where(mask, f.coeffs, 0.0))
    return State(q=trunc(state.q),
                 u=VectorSpectralField(trunc(state.u.u1), trunc(state.u.u2)),
                 t=state.t)


# ---------------------------------------------------------------------------
# Tendencies.
# ---------------------------------------------------------------------------

def _to_stack(state: State) -> np.ndarray:
    return np.stack([state.q.coeffs, state.u.u1.coeffs, state.u.u2.coeffs])


def _from_stack(grid: TorusGrid, z: np.ndarray, t: float) -> State:
    q = SpectralField._wrap(grid, z[0].copy())
    u = VectorSpectralField(SpectralField._wrap(grid, z[1].copy()),
                            SpectralField._wrap(grid, z[2].copy()))
    return State(q=q, u=u, t=t)


def _phys(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    return (np.fft.ifft2(coeffs) * grid.n**2).real


def _spec(grid: TorusGrid, samples: np.ndarray) -> np.ndarray:
    out = np.fft.fft2(samples) / grid.n**2
    out[0, 0] = 0.0
    return out


def _riesz_damp_table(grid: TorusGrid, eps: float) -> np.ndarray:
    from .operators import MultiplierSpec, multiplier_table
    return multiplier_table(grid, MultiplierSpec("inverse_lambda_eps", (float(eps), True)))


class _Tendency:
    """Nonlinear + forcing tendency of the coupled system (stiff part excluded).

    Products are formed in physical space, derivatives in spectral space,
    every quadratic product is dealiased, and the velocity tendency is
    Leray-projected so the pressure never appears.
    """

    def __init__(self, grid: TorusGrid, forcing: _CompiledForcing, cfg: SolverConfig):
        self.grid = grid
        self.forcing = forcing
        self.cfg = cfg
        self.mask = galerkin_mask(grid, cfg.galerkin_n)
        self.riesz_damp = _riesz_damp_table(grid, cfg.epsilon)
        g = grid
        self.k2safe = np.where(g.k2 > 0, g.k2, 1.0)

    def max_speed(self, z: np.ndarray) -> float:
        u1 = _phys(self.grid, z[1])
        u2 = _phys(self.grid, z[2])
        return float(np.max(np.hypot(u1, u2)))

    def check_cfl(self, z: np.ndarray) -> None:
        umax = self.max_speed(z)
        if self.cfg.dt * umax * (self.grid.n / 2.0) > 0.5:
            raise CFLError(
                f"CFL guard: dt*max|u|*(n/2) = {self.cfg.dt * umax * self.grid.n / 2.0:.3f} > 0.5 "
                f"(max|u| = {umax:.3f})")

    def __call__(self, z: np.ndarray) -> np.ndarray:
        g = self.grid
        q_hat, u1_hat, u2_hat = z
        u1 = _phys(g, u1_hat)
        u2 = _phys(g, u2_hat)
        qx = _phys(g, 1j * g.kx * q_hat)
        qy = _phys(g, 1j * g.ky * q_hat)
        dq = -_spec(g, u1 * qx + u2 * qy)

        # u . grad u, component-wise.
        u1x = _phys(g, 1j * g.kx * u1_hat)
        u1y = _phys(g, 1j * g.ky * u1_hat)
        u2x = _phys(g, 1j * g.kx * u2_hat)
        u2y = _phys(g, 1j * g.ky * u2_hat)
        adv1 = u1 * u1x + u2 * u1y
        adv2 = u1 * u2x + u2 * u2y

        # Electric force q * R_eps q (damped Riesz at eps > 0).
        qp = _phys(g, q_hat)
        r1 = _phys(g, 1j * g.kx * self.riesz_damp * q_hat)
        r2 = _phys(g, 1j * g.ky * self.riesz_damp * q_hat)
        force1 = -adv1 - qp * r1
        force2 = -adv2 - qp * r2
        if not self.forcing.trivial:
            force1 = force1 - qp * self.forcing.grad_phi_phys[0]
            force2 = force2 - qp * self.forcing.grad_phi_phys[1]
        w1 = _spec(g, force1)
        w2 = _spec(g, force2)
        if not self.forcing.trivial:
            w1 = w1 + self.forcing.f_hat[0]
            w2 = w2 + self.forcing.f_hat[1]
            dq = dq + self.forcing.lap_phi_hat

        # Leray projection of the velocity tendency.
        kdot = (g.kx * w1 + g.ky * w2) / self.k2safe
        du1 = w1 - g.kx * kdot
        du2 = w2 - g.ky * kdot

        out = np.stack([dq, du1, du2])
        out *= self.mask
        return out


def nonlinear_rhs(state: State, forcing: ForcingSpec, cfg: SolverConfig
                  ) -> tuple[SpectralField, VectorSpectralField]:
    """Spectral tendencies excluding the stiff diagonal dissipation."""
    grid = state.grid
    tend = _Tendency(grid, forcing.compile(grid), cfg)
    z = _to_stack(state)
    tend.check_cfl(z)
    dz = tend(z)
    dq = SpectralField._wrap(grid, dz[0])
    du = VectorSpectralField(SpectralField._wrap(grid, dz[1]), SpectralField._wrap(grid, dz[2]))
    return dq, du


def electric_force_spectral(q: SpectralField, eps: float = 0.0
                            ) -> tuple[SpectralField, SpectralField]:
    """Dealiased spectral product q * R_eps q, before any projection.

    Returned as a plain component pair: the product is generally not
    divergence-free (the Leray projection happens inside the tendency).
    """
    g = q.grid
    qp = inverse_transform(q)
    r = riesz_transform_eps(q, eps)
    w1 = dealias(forward_transform(g, qp * inverse_transform(r.u1)))
    w2 = dealias(forward_transform(g, qp * inverse_transform(r.u2)))
    return w1, w2


# ---------------------------------------------------------------------------
# Integrating-factor Runge-Kutta stepping.
# ---------------------------------------------------------------------------

def _linear_symbols(grid: TorusGrid, cfg: SolverConfig) -> np.ndarray:
    """Stiff diagonal symbols: |k|^alpha (+ eps|k|^2) on q, |k|^2 on u."""
    kmag = grid.kmag
    lam_q = np.where(kmag > 0, kmag**cfg.alpha, 0.0) + cfg.epsilon * grid.k2
    lam_u = grid.k2
    return np.stack([lam_q, lam_u, lam_u])


class Stepper:
    """Advances stacked states; reusable across steps for one (grid, cfg)."""

    def __init__(self, grid: TorusGrid, forcing: ForcingSpec, cfg: SolverConfig):
        self.grid = grid
        self.cfg = cfg
        self.tend = _Tendency(grid, forcing.compile(grid), cfg)
        lam = _linear_symbols(grid, cfg)
        self.e_full = np.exp(-cfg.dt * lam)
        self.e_half = np.exp(-0.5 * cfg.dt * lam)

    def advance(self, z: np.ndarray) -> np.ndarray:
        self.tend.check_cfl(z)
        if self.cfg.scheme == "IFRK2":
            return self._ifrk2(z, self.tend)
        return self._ifrk4(z, self.tend)

    def _ifrk2(self, z: np.ndarray, rhs) -> np.ndarray:
        dt, e = self.cfg.dt, self.e_full
        k1 = rhs(z)
        z1 = e * (z + dt * k1)
        k2 = rhs(z1)
        return e * z + 0.5 * dt * (e * k1 + k2)

    def _ifrk4(self, z: np.ndarray, rhs) -> np.ndarray:
        dt, e, eh = self.cfg.dt, self.e_full, self.e_half
        k1 = rhs(z)
        a = eh * (z + 0.5 * dt * k1)
        k2 = rhs(a)
        b = eh * z + 0.5 * dt * k2
        k3 = rhs(b)
        c = e * z + dt * eh * k3
        k4 = rhs(c)
        return e * z + dt / 6.0 * (e * k1 + 2.0 * eh * (k2 + k3) + k4)


def step(state: State, forcing: ForcingSpec, cfg: SolverConfig) -> State:
    """Advance one dt; with all nonlinear and forcing terms zero the result
    is exact linear decay to machine precision."""
    stepper = Stepper(state.grid, forcing, cfg)
    z = stepper.advance(_to_stack(state))
    return _from_stack(state.grid, z, state.t + cfg.dt)


def run(initial: State, forcing: ForcingSpec, cfg: SolverConfig, T: float,
        sample_every: int = 1, sinks: list | None = None) -> list:
    """Integrate to time T, sampling diagnostics every ``sample_every`` steps.

    Returns the list of DiagnosticsRecords (empty for T = 0, in which case
    sinks still see the initial state once). Deterministic: identical
    inputs reproduce identical outputs bit-for-bit.
    """
    from .diagnostics import fill_energy_residuals, record_from_state

    sinks = sinks or []
    if T <= 0.0:
        for sink in sinks:
            sink(initial, None)
        return []
    n_steps = int(round(T / cfg.dt))
    stepper = Stepper(initial.grid, forcing, cfg)
    z = _to_stack(initial)
    records = []
    state = initial
    rec = record_from_state(state, cfg)
    records.append(rec)
    for sink in sinks:
        sink(state, rec)
    for i in range(1, n_steps + 1):
        z = stepper.advance(z)
        if i % sample_every == 0 or i == n_steps:
            state = _from_stack(initial.grid, z, initial.t + i * cfg.dt)
            rec = record_from_state(state, cfg)
            records.append(rec)
            for sink in sinks:
                sink(state, rec)
    fill_energy_residuals(records, cfg)
    return records


def integrate(state: State, forcing: ForcingSpec, cfg: SolverConfig, T: float) -> State:
    """Advance to time T and return only the final state."""
    if T <= 0:
        return state
    n_steps = int(round(T / cfg.dt))
    stepper = Stepper(state.grid, forcing, cfg)
    z = _to_stack(state)
    for _ in range(n_steps):
        z = stepper.advance(z)
    return _from_stack(state.grid, z, state.t + n_steps * cfg.dt)


def sample_states(state: State, forcing: ForcingSpec, cfg: SolverConfig, T: float,
                  sample_every: int = 1) -> list[State]:
    """States at sample times (including t = 0)."""
    out = [state]
    if T <= 0:
        return out
    n_steps = int(round(T / cfg.dt))
    stepper = Stepper(state.grid, forcing, cfg)
    z = _to_stack(state)
    for i in range(1, n_steps + 1):
        z = stepper.advance(z)
        if i % sample_every == 0 or i == n_steps:
            out.append(_from_stack(state.grid, z, state.t + i * cfg.dt))
    return out


# ---------------------------------------------------------------------------
# Tangent (linearized) flow.
# ---------------------------------------------------------------------------

@dataclass
class TangentState:
    """Frame of tangent pairs (dq, du) co-evolving with a base trajectory."""

    vectors: np.ndarray  # shape (N, 3, n, n) complex stacked fields
    grid: TorusGrid

    @classmethod
    def from_fields(cls, pairs: list[tuple[SpectralField, VectorSpectralField]]) -> "TangentState":
        grid = pairs[0][0].grid
        vecs = np.stack([np.stack([dq.coeffs, du.u1.coeffs, du.u2.coeffs]) for dq, du in pairs])
        return cls(vectors=vecs, grid=grid)

    @classmethod
    def random(cls, grid: TorusGrid, n_vectors: int, seed: int, slope: float = 2.0) -> "TangentState":
        rng = np.random.default_rng(seed)
        pairs = []
        for _ in range(n_vectors):
            dq = sp.random_field(grid, 0, slope=slope, amplitude=1.0, rng=rng)
            raw1 = sp.random_field(grid, 0, slope=slope, amplitude=1.0, rng=rng)
            raw2 = sp.random_field(grid, 0, slope=slope, amplitude=1.0, rng=rng)
            du = leray_project(raw1, raw2)
            pairs.append((dq, du))
        ts = cls.from_fields(pairs)
        return orthonormalize(ts)

    def fields(self, i: int) -> tuple[SpectralField, VectorSpectralField]:
        v = self.vectors[i]
        return (SpectralField._wrap(self.grid, v[0].copy()),
                VectorSpectralField(SpectralField._wrap(self.grid, v[1].copy()),
                                    SpectralField._wrap(self.grid, v[2].copy())))

    def __len__(self) -> int:
        return self.vectors.shape[0]


def _h_inner(a: np.ndarray, b: np.ndarray) -> float:
    """L^2 x L^2 inner product of stacked tangent vectors (real fields)."""
    return sp.TWO_PI**2 * float(np.real(np.sum(np.conj(b) * a)))


def h_norm_stack(a: np.ndarray) -> float:
    return float(np.sqrt(max(_h_inner(a, a), 0.0)))


def gram_matrix_tangent(ts: TangentState) -> np.ndarray:
    n = len(ts)
    g = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            g[i, j] = g[j, i] = _h_inner(ts.vectors[i], ts.vectors[j])
    return g


def orthonormalize(ts: TangentState, cond_limit: float = 1e12) -> TangentState:
    """Modified Gram-Schmidt in the L^2 x L^2 inner product.

    Raises RankCollapseError when the incoming frame's Gram matrix has
    condition number beyond ``cond_limit`` (for example duplicated
    vectors).
    """
    gram = gram_matrix_tangent(ts)
    cond = float(np.linalg.cond(gram))
    if not np.isfinite(cond) or cond > cond_limit:
        raise RankCollapseError(f"tangent frame degenerate: Gram condition number {cond:.3e}")
    vecs = ts.vectors.copy()
    n = len(ts)
    for i in range(n):
        for j in range(i):
            proj = _h_inner(vecs[i], vecs[j])
            vecs[i] = vecs[i] - proj * vecs[j]
        nrm = h_norm_stack(vecs[i])
        if nrm == 0.0:
            raise RankCollapseError(f"tangent vector {i} vanished during re-orthonormalization")
        vecs[i] = vecs[i] / nrm
    return TangentState(vectors=vecs, grid=ts.grid)


class LinearizedTendency:
    """Tendency of the flow linearized along a base state (stiff part excluded).

    For a tangent (r, v) along base (qb, ub):
        dr = -dealias(ub.grad r + v.grad qb)
        dv = P[-dealias(v.grad ub + ub.grad v) - dealias(r R qb + qb R r)]
    with the damped Riesz transform when the base system is regularized.
    """

    def __init__(self, grid: TorusGrid, cfg: SolverConfig):
        self.grid = grid
        self.cfg = cfg
        self.mask = galerkin_mask(grid, cfg.galerkin_n)
        self.riesz_damp = _riesz_damp_table(grid, cfg.epsilon)
        self.k2safe = np.where(grid.k2 > 0, grid.k2, 1.0)

    def base_context(self, zb: np.ndarray) -> dict:
        g = self.grid
        qb_hat, u1_hat, u2_hat = zb
        ctx = {
            "u1": _phys(g, u1_hat), "u2": _phys(g, u2_hat),
            "qb": _phys(g, qb_hat),
            "qbx": _phys(g, 1j * g.kx * qb_hat), "qby": _phys(g, 1j * g.ky * qb_hat),
            "u1x": _phys(g, 1j * g.kx * u1_hat), "u1y": _phys(g, 1j * g.ky * u1_hat),
            "u2x": _phys(g, 1j * g.kx * u2_hat), "u2y": _phys(g, 1j * g.ky * u2_hat),
            "rqb1": _phys(g, 1j * g.kx * self.riesz_damp * qb_hat),
            "rqb2": _phys(g, 1j * g.ky * self.riesz_damp * qb_hat),
        }
        return ctx

    def __call__(self, ctx: dict, w: np.ndarray) -> np.ndarray:
        g = self.grid
        r_hat, v1_hat, v2_hat = w
        rp = _phys(g, r_hat)
        v1 = _phys(g, v1_hat)
        v2 = _phys(g, v2_hat)
        rx = _phys(g, 1j * g.kx * r_hat)
        ry = _phys(g, 1j * g.ky * r_hat)
        dr = -_spec(g, ctx["u1"] * rx + ctx["u2"] * ry + v1 * ctx["qbx"] + v2 * ctx["qby"])

        v1x = _phys(g, 1j * g.kx * v1_hat)
        v1y = _phys(g, 1j * g.ky * v1_hat)
        v2x = _phys(g, 1j * g.kx * v2_hat)
        v2y = _phys(g, 1j * g.ky * v2_hat)
        adv1 = v1 * ctx["u1x"] + v2 * ctx["u1y"] + ctx["u1"] * v1x + ctx["u2"] * v1y
        adv2 = v1 * ctx["u2x"] + v2 * ctx["u2y"] + ctx["u1"] * v2x + ctx["u2"] * v2y

        rr1 = _phys(g, 1j * g.kx * self.riesz_damp * r_hat)
        rr2 = _phys(g, 1j * g.ky * self.riesz_damp * r_hat)
        el1 = rp * ctx["rqb1"] + ctx["qb"] * rr1
        el2 = rp * ctx["rqb2"] + ctx["qb"] * rr2

        w1 = _spec(g, -adv1 - el1)
        w2 = _spec(g, -adv2 - el2)
        kdot = (g.kx * w1 + g.ky * w2) / self.k2safe
        dv1 = w1 - g.kx * kdot
        dv2 = w2 - g.ky * kdot
        out = np.stack([dr, dv1, dv2])
        out *= self.mask
        return out


class CoupledStepper:
    """Advances the base state and a tangent frame through shared RK stages.

    The tangent update is the exact derivative of the discrete base map,
    so finite differences of two nonlinear runs converge to the tangent
    flow at rate O(h) in the perturbation size.
    """

    def __init__(self, grid: TorusGrid, forcing: ForcingSpec, cfg: SolverConfig):
        self.grid = grid
        self.cfg = cfg
        self.tend = _Tendency(grid, forcing.compile(grid), cfg)
        self.lin = LinearizedTendency(grid, cfg)
        lam = _linear_symbols(grid, cfg)
        self.e_full = np.exp(-cfg.dt * lam)
        self.e_half = np.exp(-0.5 * cfg.dt * lam)

    def _stage_pair(self, zb: np.ndarray, tangents: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ctx = self.lin.base_context(zb)
        kb = self.tend(zb)
        kt = np.stack([self.lin(ctx, w) for w in tangents])
        return kb, kt

    def advance(self, zb: np.ndarray, tangents: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        self.tend.check_cfl(zb)
        dt, e, eh = self.cfg.dt, self.e_full, self.e_half
        if self.cfg.scheme == "IFRK2":
            k1b, k1t = self._stage_pair(zb, tangents)
            z1 = e * (zb + dt * k1b)
            w1 = e * (tangents + dt * k1t)
            k2b, k2t = self._stage_pair(z1, w1)
            zb_next = e * zb + 0.5 * dt * (e * k1b + k2b)
            tg_next = e * tangents + 0.5 * dt * (e * k1t + k2t)
            return zb_next, tg_next
        k1b, k1t = self._stage_pair(zb, tangents)
        ab = eh * (zb + 0.5 * dt * k1b)
        at = eh * (tangents + 0.5 * dt * k1t)
        k2b, k2t = self._stage_pair(ab, at)
        bb = eh * zb + 0.5 * dt * k2b
        bt = eh * tangents + 0.5 * dt * k2t
        k3b, k3t = self._stage_pair(bb, bt)
        cb = e * zb + dt * eh * k3b
        ct = e * tangents + dt * eh * k3t
        k4b, k4t = self._stage_pair(cb, ct)
        zb_next = e * zb + dt / 6.0 * (e * k1b + 2.0 * eh * (k2b + k3b) + k4b)
        tg_next = e * tangents + dt / 6.0 * (e * k1t + 2.0 * eh * (k2t + k3t) + k4t)
        return zb_next, tg_next


def linearized_step(base: State, tangents: TangentState, forcing: ForcingSpec,
                    cfg: SolverConfig, n_steps: int = 1,
                    reorth_interval: int = 0) -> tuple[State, TangentState]:
    """Advance base and tangents together for n_steps.

    Re-orthonormalization (modified Gram-Schmidt in L^2 x L^2) is applied
    every ``reorth_interval`` steps when the interval is positive.
    """
    stepper = CoupledStepper(base.grid, forcing, cfg)
    zb = _to_stack(base)
    tg = tangents.vectors.copy()
    ts = tangents
    for i in range(1, n_steps + 1):
        zb, tg = stepper.advance(zb, tg)
        if reorth_interval and i % reorth_interval == 0:
            ts = orthonormalize(TangentState(vectors=tg, grid=base.grid))
            tg = ts.vectors.copy()
    out_state = _from_stack(base.grid, zb, base.t + n_steps * cfg.dt)
    return out_state, TangentState(vectors=tg, grid=base.grid)


# ---------------------------------------------------------------------------
# Initial conditions.
# ---------------------------------------------------------------------------

def single_mode_state(grid: TorusGrid, amplitude: float = 1.0, k: tuple[int, int] = (1, 0)) -> State:
    """q = amplitude * cos(k.x), u = 0."""
    q = SpectralField.from_modes(grid, {k: amplitude / 2.0})
    return State(q=q, u=VectorSpectralField.zeros(grid), t=0.0)


def taylor_green_state(grid: TorusGrid, amplitude: float = 1.0) -> State:
    """u = a(cos x sin y, -sin x cos y), q = a sin x sin y."""
    x, y = grid.x, grid.y
    u1 = forward_transform(grid, amplitude * np.cos(x) * np.sin(y))
    u2 = forward_transform(grid, -amplitude * np.sin(x) * np.cos(y))
    q = forward_transform(grid, amplitude * np.sin(x) * np.sin(y))
    return State(q=q, u=VectorSpectralField(u1, u2), t=0.0)


def random_state(grid: TorusGrid, seed: int, slope: float = 3.0,
                 amplitude: float = 1.0) -> State:
    """Random smooth data: |k|^-slope spectra, velocity Leray-projected."""
    rng = np.random.default_rng(seed)
    q = sp.random_field(grid, 0, slope=slope, amplitude=amplitude, rng=rng)
    raw1 = sp.random_field(grid, 0, slope=slope, amplitude=1.0, rng=rng)
    raw2 = sp.random_field(grid, 0, slope=slope, amplitude=1.0, rng=rng)
    u = leray_project(raw1, raw2)
    nrm = sp.l2_norm_vec(u)
    if nrm > 0:
        u = u * (amplitude / nrm)
    return State(q=q, u=u, t=0.0)


def gevrey_state(grid: TorusGrid, seed: int, tau: float, s: float,
                 amplitude: float = 1.0) -> State:
    """Analytic data with exp(-tau |k|^s) envelopes on q and u."""
    q = sp.gevrey_field(grid, seed, tau, s, amplitude)
    raw1 = sp.gevrey_field(grid, seed + 1, tau, s, amplitude)
    raw2 = sp.gevrey_field(grid, seed + 2, tau, s, amplitude)
    u = leray_project(raw1, raw2)
    nrm = sp.l2_norm_vec(u)
    if nrm > 0:
        u = u * (amplitude / nrm)
    return State(q=q, u=u, t=0.0)


def perturbed_state(state: State, direction: State, h: float) -> State:
    """state + h * direction (used by the flow-map continuity experiment)."""
    q = SpectralField._wrap(state.grid, state.q.coeffs + h * direction.q.coeffs)
    u = VectorSpectralField(
        SpectralField._wrap(state.grid, state.u.u1.coeffs + h * direction.u.u1.coeffs),
        SpectralField._wrap(state.grid, state.u.u2.coeffs + h * direction.u.u2.coeffs))
    return State(q=q, u=u, t=state.t)


def state_diff_h_norm(a: State, b: State) -> float:
    """|| a - b ||_H with H = L^2 x L^2."""
    dq = sp.l2_norm(a.q - b.q)
    du = sp.l2_norm_vec(a.u - b.u)
    return float(np.hypot(dq, du))
