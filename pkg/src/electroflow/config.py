"""Flat `key = value` run configuration: strict parsing and echo.

The format is plain text with `#` comments and dotted section prefixes
(`forcing.f_modes = ...`), chosen so experiment configs diff cleanly.
Unknown keys are rejected, every range error names the offending line,
and the echo of a parsed config re-parses to the identical RunConfig
(serialization fixpoint).
"""

from __future__ import annotations

from dataclasses import dataclass


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key/line."""


SCENARIOS = ("decay", "lp_decay", "absorbing_ball", "lipschitz", "gevrey",
             "eps_convergence", "galerkin", "volume_trace")

IC_KINDS = ("random", "single_mode", "taylor_green", "gevrey", "snapshot")


@dataclass(frozen=True)
class RunConfig:
    """Fully-resolved configuration of one scenario run."""

    scenario: str
    alpha: float
    n: int
    dt: float
    T: float
    scheme: str = "IFRK2"
    epsilon: float = 0.0
    galerkin_n: int | None = None
    seed: int = 0
    sample_every: int = 1
    output_dir: str = "out"
    snapshot_times: tuple[float, ...] = ()
    ic_kind: str = "random"
    ic_amplitude: float = 1.0
    ic_slope: float = 3.0
    ic_tau0: float = 0.5
    ic_path: str = ""
    f_modes: tuple[tuple[tuple[int, int], tuple[complex, complex]], ...] = ()
    phi_modes: tuple[tuple[tuple[int, int], complex], ...] = ()
    fit_window: tuple[float, float] = (2.0, 10.0)
    eps_ladder: tuple[float, ...] = (1e-1, 1e-2, 1e-3, 1e-4)
    galerkin_ladder: tuple[int, ...] = (4, 16, 64)
    lipschitz_h: tuple[float, ...] = (1e-4, 1e-6)
    ensemble_scales: tuple[float, ...] = (0.1, 1.0, 10.0)
    trace_n_tangents: int = 32
    trace_n_values: tuple[int, ...] = (4, 8, 16, 32)
    trace_spinup: float = 5.0
    trace_reorth_every: int = 10
    gevrey_check_times: tuple[float, ...] = (0.05, 0.1, 0.2, 0.4)


def _fmt_float(x: float) -> str:
    return f"{x:.17g}"


def _parse_float_list(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.split())


def _parse_int_list(s: str) -> tuple[int, ...]:
    return tuple(int(v) for v in s.split())


def _parse_f_modes(s: str):
    out = []
    for chunk in filter(None, (c.strip() for c in s.split(";"))):
        vals = chunk.split()
        if len(vals) != 6:
            raise ValueError(f"f mode needs 'kx ky re1 im1 re2 im2', got {chunk!r}")
        p, q = int(vals[0]), int(vals[1])
        a1 = complex(float(vals[2]), float(vals[3]))
        a2 = complex(float(vals[4]), float(vals[5]))
        out.append(((p, q), (a1, a2)))
    return tuple(out)


def _parse_phi_modes(s: str):
    out = []
    for chunk in filter(None, (c.strip() for c in s.split(";"))):
        vals = chunk.split()
        if len(vals) != 4:
            raise ValueError(f"phi mode needs 'kx ky re im', got {chunk!r}")
        out.append(((int(vals[0]), int(vals[1])), complex(float(vals[2]), float(vals[3]))))
    return tuple(out)


def _fmt_f_modes(modes) -> str:
    return "; ".join(
        f"{p} {q} {_fmt_float(a1.real)} {_fmt_float(a1.imag)} {_fmt_float(a2.real)} {_fmt_float(a2.imag)}"
        for (p, q), (a1, a2) in modes)


def _fmt_phi_modes(modes) -> str:
    return "; ".join(f"{p} {q} {_fmt_float(a.real)} {_fmt_float(a.imag)}" for (p, q), a in modes)


def _parse_galerkin(s: str):
    return None if s.lower() in ("", "none") else int(s)


# key -> (field name, parser, formatter, required)
_SCHEMA: dict[str, tuple[str, object, object, bool]] = {
    "scenario": ("scenario", str, str, True),
    "alpha": ("alpha", float, _fmt_float, True),
    "n": ("n", int, str, True),
    "dt": ("dt", float, _fmt_float, True),
    "T": ("T", float, _fmt_float, True),
    "scheme": ("scheme", str, str, False),
    "epsilon": ("epsilon", float, _fmt_float, False),
    "galerkin_n": ("galerkin_n", _parse_galerkin, lambda v: "none" if v is None else str(v), False),
    "seed": ("seed", int, str, False),
    "sample_every": ("sample_every", int, str, False),
    "output_dir": ("output_dir", str, str, False),
    "snapshot_times": ("snapshot_times", _parse_float_list,
                       lambda v: " ".join(_fmt_float(x) for x in v), False),
    "ic.kind": ("ic_kind", str, str, False),
    "ic.amplitude": ("ic_amplitude", float, _fmt_float, False),
    "ic.slope": ("ic_slope", float, _fmt_float, False),
    "ic.tau0": ("ic_tau0", float, _fmt_float, False),
    "ic.path": ("ic_path", str, str, False),
    "forcing.f_modes": ("f_modes", _parse_f_modes, _fmt_f_modes, False),
    "forcing.phi_modes": ("phi_modes", _parse_phi_modes, _fmt_phi_modes, False),
    "fit.window": ("fit_window", lambda s: tuple(float(v) for v in s.split()),
                   lambda v: " ".join(_fmt_float(x) for x in v), False),
    "eps.ladder": ("eps_ladder", _parse_float_list,
                   lambda v: " ".join(_fmt_float(x) for x in v), False),
    "galerkin.ladder": ("galerkin_ladder", _parse_int_list,
                        lambda v: " ".join(str(x) for x in v), False),
    "lipschitz.h": ("lipschitz_h", _parse_float_list,
                    lambda v: " ".join(_fmt_float(x) for x in v), False),
    "ensemble.scales": ("ensemble_scales", _parse_float_list,
                        lambda v: " ".join(_fmt_float(x) for x in v), False),
    "trace.n_tangents": ("trace_n_tangents", int, str, False),
    "trace.n_values": ("trace_n_values", _parse_int_list,
                       lambda v: " ".join(str(x) for x in v), False),
    "trace.spinup": ("trace_spinup", float, _fmt_float, False),
    "trace.reorth_every": ("trace_reorth_every", int, str, False),
    "gevrey.check_times": ("gevrey_check_times", _parse_float_list,
                           lambda v: " ".join(_fmt_float(x) for x in v), False),
}


def _validate(cfg: RunConfig, lines: dict[str, int]) -> None:
    def where(key: str) -> str:
        return f"line {lines[key]}" if key in lines else "default"

    def fail(key: str, msg: str):
        raise ConfigError(f"{key} ({where(key)}): {msg}")

    if cfg.scenario not in SCENARIOS:
        fail("scenario", f"unknown scenario {cfg.scenario!r}; available: {', '.join(SCENARIOS)}")
    if not 0.0 < cfg.alpha <= 1.0:
        fail("alpha", f"must lie in (0, 1], got {cfg.alpha}")
    if cfg.n < 8 or cfg.n % 2:
        fail("n", f"must be even and >= 8, got {cfg.n}")
    if cfg.dt <= 0:
        fail("dt", f"must be positive, got {cfg.dt}")
    if cfg.T < 0:
        fail("T", f"must be >= 0, got {cfg.T}")
    if cfg.scheme not in ("IFRK2", "IFRK4"):
        fail("scheme", f"must be IFRK2 or IFRK4, got {cfg.scheme!r}")
    if cfg.epsilon < 0:
        fail("epsilon", f"must be >= 0, got {cfg.epsilon}")
    if cfg.sample_every < 1:
        fail("sample_every", f"must be >= 1, got {cfg.sample_every}")
    if cfg.ic_kind not in IC_KINDS:
        fail("ic.kind", f"unknown kind {cfg.ic_kind!r}; available: {', '.join(IC_KINDS)}")
    if cfg.ic_kind == "snapshot" and not cfg.ic_path:
        fail("ic.path", "required when ic.kind = snapshot")
    if cfg.ic_amplitude <= 0:
        fail("ic.amplitude", f"must be positive, got {cfg.ic_amplitude}")
    if len(cfg.fit_window) != 2 or cfg.fit_window[0] >= cfg.fit_window[1]:
        fail("fit.window", f"needs 't_a t_b' with t_a < t_b, got {cfg.fit_window}")
    if any(e < 0 for e in cfg.eps_ladder):
        fail("eps.ladder", "entries must be >= 0")
    if any(g < 1 for g in cfg.galerkin_ladder):
        fail("galerkin.ladder", "entries must be >= 1")
    if any(h <= 0 for h in cfg.lipschitz_h):
        fail("lipschitz.h", "entries must be positive")
    if any(s <= 0 for s in cfg.ensemble_scales):
        fail("ensemble.scales", "entries must be positive")
    if cfg.trace_n_tangents < 1:
        fail("trace.n_tangents", f"must be >= 1, got {cfg.trace_n_tangents}")
    if max(cfg.trace_n_values, default=0) > cfg.trace_n_tangents:
        fail("trace.n_values", "largest N exceeds trace.n_tangents")
    if cfg.trace_reorth_every < 1:
        fail("trace.reorth_every", f"must be >= 1, got {cfg.trace_reorth_every}")
    # Solver-level constraints (divergence-free forcing, galerkin block).
    try:
        from .solver import ForcingSpec, SolverConfig
        ForcingSpec(f_modes=cfg.f_modes, phi_modes=cfg.phi_modes)
        SolverConfig(alpha=cfg.alpha, dt=cfg.dt, n=cfg.n, scheme=cfg.scheme,
                     epsilon=cfg.epsilon, galerkin_n=cfg.galerkin_n, seed=cfg.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(text: str) -> RunConfig:
    """Parse a flat key = value config; strict about unknown keys."""
    values: dict[str, str] = {}
    lines_seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} (first at line {lines_seen[key]})")
        values[key] = value
        lines_seen[key] = lineno

    missing = [k for k, (_, _, _, req) in _SCHEMA.items() if req and k not in values]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")

    kwargs = {}
    for key, raw_value in values.items():
        field_name, parser, _, _ = _SCHEMA[key]
        try:
            kwargs[field_name] = parser(raw_value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{key} (line {lines_seen[key]}): {exc}") from exc
    cfg = RunConfig(**kwargs)
    _validate(cfg, lines_seen)
    return cfg


def parse_config_file(path: str) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def echo_config(cfg: RunConfig) -> str:
    """Canonical text of the fully-resolved config (defaults materialized)."""
    lines = ["# fully-resolved run configuration"]
    for key, (field_name, _, fmt, _) in _SCHEMA.items():
        lines.append(f"{key} = {fmt(getattr(cfg, field_name))}")
    return "\n".join(lines) + "\n"


def config_fingerprint(cfg: RunConfig) -> str:
    """Stable short identity used in summaries."""
    import hashlib
    return hashlib.sha256(echo_config(cfg).encode()).hexdigest()[:12]
