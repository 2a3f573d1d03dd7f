"""Field snapshot files: one JSON header line + raw little-endian float64.

Layout: a single line of JSON text (keys N, N_g, alpha, time) terminated by
a newline, followed by N*N coefficients in row-major (m, n) order.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .spectral import SineField


def write_snapshot(path, field: SineField, n_grid: int, alpha: float, time: float) -> None:
    path = Path(path)
    header = {"N": field.n_modes, "N_g": int(n_grid), "alpha": float(alpha),
              "time": float(time)}
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("ascii"))
        fh.write(np.ascontiguousarray(field.coeffs, dtype="<f8").tobytes())


def read_snapshot(path):
    """Returns (SineField, header dict)."""
    path = Path(path)
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("ascii"))
        n = int(header["N"])
        raw = fh.read(8 * n * n)
    if len(raw) != 8 * n * n:
        raise ValueError(f"snapshot {path} truncated: expected {n}x{n} coefficients")
    coeffs = np.frombuffer(raw, dtype="<f8").reshape(n, n).copy()
    return SineField(coeffs), header
