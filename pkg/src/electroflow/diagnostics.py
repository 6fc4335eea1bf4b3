"""Norms, rate fits, Gevrey radius estimation, differential-inequality
conclusion checking, and the trace/eigenvalue estimators.

A DiagnosticsRecord is one CSV row; the schema is frozen in
:mod:`electroflow.fileio`. The estimators here never invent constants:
decay fits report the fitted rate and r^2, the Gevrey radius is a
per-shell log fit, and the Gronwall checker validates both the
differential-inequality hypothesis and the stated conclusion bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import spectral as sp
from .solver import SolverConfig, State, TangentState
from .spectral import SpectralField


class FitError(ValueError):
    """Fit preconditions violated (nonpositive samples, too few points...)."""


class ShellResolutionError(ValueError):
    """Too few resolved spectral shells for a Gevrey radius fit."""


NAN = float("nan")


# ---------------------------------------------------------------------------
# Norms.
# ---------------------------------------------------------------------------

def lp_norm(f: SpectralField, p: int) -> float:
    """L^p norm over the torus; p = 2 via Parseval, p > 2 by quadrature.

    The quadrature grid is refined x2 beyond the dealias block so the
    pointwise power is resolved.
    """
    if p not in (2, 4, 6, 8):
        raise ValueError(f"p must be one of 2, 4, 6, 8; got {p}")
    if p == 2:
        return sp.l2_norm(f)
    g = f.grid
    m = 2 * g.n
    padded = np.zeros((m, m), dtype=np.complex128)
    kx = np.fft.fftfreq(g.n, 1.0 / g.n).astype(int)
    idx = kx % m
    padded[np.ix_(idx, idx)] = f.coeffs
    samples = (np.fft.ifft2(padded) * m**2).real
    return float((sp.TWO_PI**2 * np.mean(np.abs(samples) ** p)) ** (1.0 / p))


# ---------------------------------------------------------------------------
# Diagnostics records.
# ---------------------------------------------------------------------------

@dataclass
class DiagnosticsRecord:
    """One time sample of every tracked norm plus fitted quantities."""

    t: float
    l2_q: float
    l4_q: float
    l8_q: float
    h1_q: float
    halpha2_q: float
    l2_u: float
    h1_u: float
    h2_u: float
    gevrey_tau_hat: float
    energy_residual: float


def record_from_state(state: State, cfg: SolverConfig) -> DiagnosticsRecord:
    q, u = state.q, state.u
    try:
        tau_hat = gevrey_radius_fit(q, cfg.alpha)
    except ShellResolutionError:
        tau_hat = NAN
    return DiagnosticsRecord(
        t=state.t,
        l2_q=sp.l2_norm(q),
        l4_q=lp_norm(q, 4),
        l8_q=lp_norm(q, 8),
        h1_q=sp.hs_norm(q, 1.0),
        halpha2_q=sp.hs_norm(q, cfg.alpha / 2.0),
        l2_u=sp.l2_norm_vec(u),
        h1_u=sp.hs_norm_vec(u, 1.0),
        h2_u=sp.hs_norm_vec(u, 2.0),
        gevrey_tau_hat=tau_hat,
        energy_residual=NAN,
    )


def fill_energy_residuals(records: list[DiagnosticsRecord], cfg: SolverConfig) -> None:
    """Discrete d/dt ||q||^2 + 2||Lambda^(a/2) q||^2 + 2 eps ||Lambda q||^2.

    Central differences over neighboring samples; endpoints stay NaN. For
    the unforced system the residual is the time-discretization defect of
    the energy balance and shrinks at the scheme's order.
    """
    for i in range(1, len(records) - 1):
        r_prev, r, r_next = records[i - 1], records[i], records[i + 1]
        dt2 = r_next.t - r_prev.t
        if dt2 <= 0:
            continue
        ddt = (r_next.l2_q**2 - r_prev.l2_q**2) / dt2
        r.energy_residual = (ddt + 2.0 * r.halpha2_q**2
                             + 2.0 * cfg.epsilon * r.h1_q**2)


# ---------------------------------------------------------------------------
# Rate fitting.
# ---------------------------------------------------------------------------

def decay_rate_fit(t: np.ndarray, y: np.ndarray,
                   window: tuple[float, float] | None = None) -> tuple[float, float, float]:
    """Least-squares fit of log y against t; returns (rate, amplitude, r2).

    rate is the magnitude of the fitted slope (decay positive). Requires
    at least 10 strictly positive samples in the window.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, y = t[keep], y[keep]
    if t.size < 10:
        raise FitError(f"need at least 10 samples in the fit window, got {t.size}")
    if np.any(y <= 0):
        raise FitError("nonpositive samples in the fit window")
    logy = np.log(y)
    slope, intercept = np.polyfit(t, logy, 1)
    pred = slope * t + intercept
    ss_res = float(np.sum((logy - pred) ** 2))
    ss_tot = float(np.sum((logy - np.mean(logy)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(abs(slope)), float(np.exp(intercept)), r2


def shell_maxima(f: SpectralField) -> tuple[np.ndarray, np.ndarray]:
    """Per-shell max |f_k| over shells |k| in [j, j+1), with the |k| of the
    maximizing mode (so constructed pure-envelope spectra fit exactly)."""
    g = f.grid
    mags = np.abs(f.coeffs)
    kmag = g.kmag
    inside = g.dealias_mask & (g.k2 > 0)
    shells = np.floor(kmag).astype(int)
    jmax = int(np.max(shells[inside]))
    peaks, peak_k = [], []
    for j in range(1, jmax + 1):
        sel = inside & (shells == j)
        if not np.any(sel):
            continue
        vals = np.where(sel, mags, -1.0)
        idx = np.unravel_index(np.argmax(vals), vals.shape)
        peaks.append(mags[idx])
        peak_k.append(kmag[idx])
    return np.asarray(peak_k), np.asarray(peaks)


def gevrey_radius_fit(f: SpectralField, alpha: float, floor: float = 1e-14,
                      min_shells: int = 6) -> float:
    """Estimate the Gevrey radius: slope of log(shell max) vs |k|^(alpha/2).

    Only shells with max amplitude above ``floor`` enter the fit; fewer
    than ``min_shells`` resolved shells raises ShellResolutionError.
    """
    peak_k, peaks = shell_maxima(f)
    resolved = peaks > floor
    if int(np.sum(resolved)) < min_shells:
        raise ShellResolutionError(
            f"only {int(np.sum(resolved))} resolved shells (need {min_shells})")
    x = peak_k[resolved] ** (alpha / 2.0)
    y = np.log(peaks[resolved])
    slope, _ = np.polyfit(x, y, 1)
    return float(-slope)


# ---------------------------------------------------------------------------
# Uniform Gronwall conclusion checking.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GronwallInput:
    """Time series and constants of dy/dt + c y <= C1 + C2 F1 + C3 F2 y^n."""

    t: np.ndarray
    y: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    c: float
    c1: float
    c2: float
    c3: float
    n: int
    r: float
    t0: float


@dataclass(frozen=True)
class GronwallReport:
    hypothesis_ok: bool
    conclusion_ok: bool
    margin: float
    bound: float
    detail: str = ""


def gronwall_verify(inp: GronwallInput, residual_tol: float = 1e-3) -> GronwallReport:
    """Check the differential-inequality hypothesis and the ceiling bound.

    Hypothesis: central-difference residual of the inequality <= tol on the
    grid, plus the unit-window bound int_t^{t+1} [F1 + F2 y^(n-1) + y] <= R.
    The window bound is enforced in both branches (with the F2 term only
    when C3 != 0); requiring the y-window also when C3 = 0 deliberately
    strengthens the hypothesis so decaying-from-large-data counterexamples
    are rejected.

    Conclusion: y(t) <= (C1/c + 2 C2 R + 2R) e^(2 C3 R) for t >= t0 + 1.
    """
    t, y, f1, f2 = (np.asarray(a, dtype=float) for a in (inp.t, inp.y, inp.f1, inp.f2))
    if not (t.shape == y.shape == f1.shape == f2.shape):
        raise ValueError("series must share one time grid")
    if t.size < 3:
        raise ValueError("need at least 3 samples")
    dt = np.diff(t)
    if np.max(np.abs(dt - dt[0])) > 1e-9 * max(dt[0], 1e-300):
        raise ValueError("time grid must be uniform")
    h = float(dt[0])
    if h > 1.0 / 20.0:
        raise ValueError(f"grid too coarse for the difference stencil: {1.0 / h:.1f} "
                         "points per unit time (need >= 20)")
    if inp.c <= 0:
        raise ValueError(f"c must be positive, got {inp.c}")
    if inp.c3 != 0 and inp.n < 1:
        raise ValueError("C3 != 0 requires n >= 1")
    if inp.t0 < t[0] or inp.t0 > t[-1]:
        raise ValueError(f"t0 = {inp.t0} outside the series range")

    start = int(np.searchsorted(t, inp.t0))
    # Differential-inequality residual by central differences.
    interior = np.arange(max(1, start), t.size - 1)
    hyp_ok = True
    detail = ""
    if interior.size:
        dydt = (y[interior + 1] - y[interior - 1]) / (t[interior + 1] - t[interior - 1])
        rhs = inp.c1 + inp.c2 * f1[interior] + inp.c3 * f2[interior] * y[interior] ** inp.n
        resid = dydt + inp.c * y[interior] - rhs
        worst = float(np.max(resid))
        if worst > residual_tol:
            hyp_ok = False
            detail = f"differential inequality violated: residual {worst:.3e} > {residual_tol:.0e}"

    # Unit-window bounds.
    w = int(round(1.0 / h))
    if hyp_ok:
        integrand = f1 + y
        if inp.c3 != 0:
            integrand = integrand + f2 * np.where(y > 0, y, 0.0) ** (inp.n - 1)
        for i in range(start, t.size - w):
            seg = integrand[i:i + w + 1]
            val = float(np.trapz(seg, dx=h))
            if val > inp.r + 1e-12:
                hyp_ok = False
                detail = f"window bound violated at t = {t[i]:.4g}: {val:.4g} > R = {inp.r:.4g}"
                break

    bound = (inp.c1 / inp.c + 2.0 * inp.c2 * inp.r + 2.0 * inp.r) * math.exp(2.0 * inp.c3 * inp.r)
    after = t >= inp.t0 + 1.0 - 1e-12
    if np.any(after):
        worst_y = float(np.max(y[after]))
        conclusion_ok = worst_y <= bound + 1e-12
        margin = bound - worst_y
    else:
        conclusion_ok = True
        margin = bound
    return GronwallReport(hypothesis_ok=hyp_ok, conclusion_ok=conclusion_ok,
                          margin=margin, bound=bound, detail=detail)


# ---------------------------------------------------------------------------
# Spectral merge bound.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigenMergeReport:
    merged: np.ndarray
    bound_ok: np.ndarray
    all_ok: bool
    partial_sum_exponent: float
    bound_constant: float
    bound_exponent: float


def _check_growth(lam: np.ndarray, c: float, beta: float, label: str) -> None:
    j = np.arange(1, lam.size + 1, dtype=float)
    bad = lam < c * j**beta - 1e-12 * np.maximum(lam, 1.0)
    if np.any(bad):
        first = int(np.argmax(bad))
        raise ValueError(
            f"{label} violates lambda_j >= c j^beta at j = {first + 1}: "
            f"{lam[first]:.6g} < {c * (first + 1) ** beta:.6g}")


def eigen_merge_bound(lambda1: np.ndarray, lambda2: np.ndarray,
                      c1: float, c2: float, beta1: float, beta2: float,
                      fit_start: int = 8) -> EigenMergeReport:
    """Merge two ascending eigenvalue sequences and check the lower bound.

    With lambda_j^i >= c_i j^(beta_i) the merged sequence mu obeys
    mu_j >= min(c1,c2) / 2^(1+min(beta)) * j^min(beta); with one empty
    input the single-sequence constants apply unchanged. Also fits the
    growth exponent of the partial sums S_N = mu_1 + ... + mu_N.
    """
    l1 = np.asarray(lambda1, dtype=float)
    l2 = np.asarray(lambda2, dtype=float)
    for lam, label in ((l1, "lambda1"), (l2, "lambda2")):
        if lam.size and np.any(np.diff(lam) < -1e-12):
            raise ValueError(f"{label} must be ascending")
    if l1.size:
        _check_growth(l1, c1, beta1, "lambda1")
    if l2.size:
        _check_growth(l2, c2, beta2, "lambda2")

    merged = np.sort(np.concatenate([l1, l2]))
    if merged.size == 0:
        raise ValueError("both sequences empty")
    if l1.size and l2.size:
        const = min(c1, c2) / 2.0 ** (1.0 + min(beta1, beta2))
        expo = min(beta1, beta2)
    elif l1.size:
        const, expo = c1, beta1
    else:
        const, expo = c2, beta2
    j = np.arange(1, merged.size + 1, dtype=float)
    bound_ok = merged >= const * j**expo - 1e-12 * np.maximum(merged, 1.0)

    sums = np.cumsum(merged)
    lo = min(fit_start, max(1, merged.size // 2))
    nvals = np.arange(lo, merged.size + 1)
    slope, _ = np.polyfit(np.log(nvals), np.log(sums[lo - 1:]), 1)
    return EigenMergeReport(merged=merged, bound_ok=bound_ok, all_ok=bool(np.all(bound_ok)),
                            partial_sum_exponent=float(slope),
                            bound_constant=const, bound_exponent=expo)


def torus_eigenvalues(kmax: int, power: float) -> np.ndarray:
    """Sorted {|k|^power} over 0 < |k| <= kmax on the integer lattice."""
    rng = np.arange(-kmax, kmax + 1)
    kx, ky = np.meshgrid(rng, rng, indexing="ij")
    k2 = kx**2 + ky**2
    sel = (k2 > 0) & (k2 <= kmax**2)
    return np.sort(np.sqrt(k2[sel].astype(float)) ** power)


# ---------------------------------------------------------------------------
# Trace of the linearized operator over a tangent frame.
# ---------------------------------------------------------------------------

def trace_estimate(base: State, tangents: TangentState, n_values: list[int],
                   cfg: SolverConfig) -> dict[int, float]:
    """Sum of Rayleigh quotients of the instantaneous linearized operator.

    For an orthonormal frame phi_i = (r_i, v_i) the trace over the first N
    vectors is sum_i (Lambda^alpha r_i, r_i) + (A v_i, v_i) plus the
    first-order coupling terms along the base state. Frames are assumed
    orthonormal in L^2 x L^2 at the evaluation time.
    """
    from .solver import LinearizedTendency, _to_stack

    g = base.grid
    if max(n_values, default=0) > len(tangents):
        raise ValueError(f"requested N = {max(n_values)} exceeds frame size {len(tangents)}")
    kmag = g.kmag
    lam_q = np.where(kmag > 0, kmag**cfg.alpha, 0.0) + cfg.epsilon * g.k2
    lam_u = g.k2

    lin = LinearizedTendency(g, cfg)
    ctx = lin.base_context(_to_stack(base))
    quotients = []
    for i in range(len(tangents)):
        w = tangents.vectors[i]
        a_part = sp.TWO_PI**2 * float(
            np.sum(lam_q * np.abs(w[0]) ** 2)
            + np.sum(lam_u * (np.abs(w[1]) ** 2 + np.abs(w[2]) ** 2)))
        # L(base) phi = -(linearized tendency); its H-pairing with phi.
        lw = lin(ctx, w)
        l_part = -sp.TWO_PI**2 * float(np.real(
            np.sum(np.conj(w[0]) * lw[0]) + np.sum(np.conj(w[1]) * lw[1])
            + np.sum(np.conj(w[2]) * lw[2])))
        quotients.append(a_part + l_part)
    cum = np.cumsum(quotients)
    return {n: (float(cum[n - 1]) if n > 0 else 0.0) for n in n_values}


# ---------------------------------------------------------------------------
# Absorbing-ball ensemble report.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AbsorbingBallReport:
    rho_hat: float
    bands: np.ndarray
    entry_times: np.ndarray
    persistent: np.ndarray
    band_ratio: float


def absorbing_ball_check(series: list[tuple[np.ndarray, np.ndarray]],
                         window: tuple[float, float],
                         slack: float = 1.1) -> AbsorbingBallReport:
    """Ensemble check of the absorbing-ball picture.

    ``series`` holds per-run (t, ||grad q|| + ||A u||) curves with identical
    forcing and initial data of different sizes. The long-time band of each
    run is its supremum over ``window``; rho_hat is the max band. A run's
    entry time is the first sample after which it never leaves
    slack * rho_hat; persistence requires that entry to exist.
    """
    if len(series) < 3:
        raise ValueError(f"need at least 3 runs, got {len(series)}")
    bands = []
    for t, v in series:
        keep = (t >= window[0]) & (t <= window[1])
        if not np.any(keep):
            raise ValueError("window contains no samples")
        bands.append(float(np.max(v[keep])))
    bands = np.asarray(bands)
    rho_hat = float(np.max(bands))
    level = slack * rho_hat
    entries, persist = [], []
    for t, v in series:
        inside = v <= level + 1e-12
        # last index where the run is outside the inflated ball
        outside_idx = np.nonzero(~inside)[0]
        if outside_idx.size == 0:
            entries.append(float(t[0]))
            persist.append(True)
        elif outside_idx[-1] + 1 < t.size:
            entries.append(float(t[outside_idx[-1] + 1]))
            persist.append(True)
        else:
            entries.append(float("inf"))
            persist.append(False)
    positive = bands[bands > 0]
    ratio = float(np.max(positive) / np.min(positive)) if positive.size else 1.0
    return AbsorbingBallReport(rho_hat=rho_hat, bands=bands,
                               entry_times=np.asarray(entries),
                               persistent=np.asarray(persist, dtype=bool),
                               band_ratio=ratio)
