"""On-disk formats: EFSNAP1 spectral snapshots, the diagnostics CSV, and
the Dirichlet kernel table dump.

The snapshot format is line-oriented text:

    EFSNAP1 <n> <t> <alpha>
    kx ky re im
    ...

one line per retained mode, 17 significant digits; modes absent from the
file are zero. The diagnostics CSV has the fixed header

    t,l2_q,l4_q,l8_q,h1_q,halpha2_q,l2_u,h1_u,h2_u,gevrey_tau_hat,energy_residual

with one row per sample and ``nan`` as the missing-value sentinel.
"""

from __future__ import annotations

import os
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .spectral import SpectralField, TorusGrid, get_grid

if TYPE_CHECKING:
    from .diagnostics import DiagnosticsRecord

SNAP_MAGIC = "EFSNAP1"

CSV_COLUMNS = (
    "t", "l2_q", "l4_q", "l8_q", "h1_q", "halpha2_q",
    "l2_u", "h1_u", "h2_u", "gevrey_tau_hat", "energy_residual",
)


class SnapshotFormatError(ValueError):
    """Malformed EFSNAP1 file."""


class CsvSchemaError(ValueError):
    """CSV header does not match the diagnostics schema."""


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_snapshot(path: str, f: SpectralField, t: float, alpha: float) -> None:
    """Write one scalar field in the EFSNAP1 text format."""
    lines = [f"{SNAP_MAGIC} {f.grid.n} {_fmt(t)} {_fmt(alpha)}"]
    kx, ky = f.grid.kx, f.grid.ky
    nz = np.argwhere(f.coeffs != 0)
    for i, j in nz:
        c = f.coeffs[i, j]
        lines.append(f"{kx[i, j]} {ky[i, j]} {_fmt(c.real)} {_fmt(c.imag)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_snapshot(path: str) -> tuple[SpectralField, float, float]:
    """Read an EFSNAP1 file; returns (field, t, alpha)."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != SNAP_MAGIC:
            raise SnapshotFormatError(f"{path}: missing '{SNAP_MAGIC} n t alpha' header")
        n, t, alpha = int(header[1]), float(header[2]), float(header[3])
        grid = get_grid(n)
        coeffs = np.zeros((n, n), dtype=np.complex128)
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise SnapshotFormatError(f"{path}:{lineno}: expected 'kx ky re im'")
            p, q = int(parts[0]), int(parts[1])
            if not (-n // 2 <= p <= n // 2 and -n // 2 <= q <= n // 2):
                raise SnapshotFormatError(f"{path}:{lineno}: mode ({p},{q}) outside grid n={n}")
            coeffs[p % n, q % n] = float(parts[2]) + 1j * float(parts[3])
    return SpectralField(grid, coeffs), t, alpha


def write_diagnostics_csv(path: str, records: Sequence["DiagnosticsRecord"]) -> None:
    lines = [",".join(CSV_COLUMNS)]
    for r in records:
        lines.append(",".join(_fmt(getattr(r, c)) for c in CSV_COLUMNS))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_diagnostics_csv(path: str) -> dict[str, np.ndarray]:
    """Read a diagnostics CSV into column arrays, validating the schema."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header.split(",") != list(CSV_COLUMNS):
            raise CsvSchemaError(f"{path}: header {header!r} does not match diagnostics schema")
        rows = [line.split(",") for line in fh if line.strip()]
    data = np.array([[float(v) for v in row] for row in rows], dtype=np.float64)
    if data.size == 0:
        data = data.reshape(0, len(CSV_COLUMNS))
    return {c: data[:, i] for i, c in enumerate(CSV_COLUMNS)}


def write_kernel_table(path: str, x: np.ndarray, y: np.ndarray,
                       k_values: np.ndarray, b_values: np.ndarray) -> None:
    """Dump sampled kernel values as 'x y K_s B_s' rows for plotting."""
    with open(path, "w") as fh:
        fh.write("x y K_s B_s\n")
        for xi, yi, ki, bi in zip(x, y, k_values, b_values):
            fh.write(f"{_fmt(xi)} {_fmt(yi)} {_fmt(ki)} {_fmt(bi)}\n")


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
