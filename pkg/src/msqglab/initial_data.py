"""Degenerate plateau initial vorticity.

On [0, pi)^2 the field is a tensor product w0(x1, x2) = u(x1) v(x2) of 1D
profiles that
  * equal (t/delta)^3 resp. t/delta up to the origin patch, so
    w0 = delta^-4 x1^3 x2 holds exactly on [0, patch]^2 (and in particular
    on the quarter-disk |x| <= patch),
  * blend monotonically to 1 across [patch, delta] with a C^blend_order
    polynomial smoothstep,
  * equal 1 on [delta, pi - delta],
  * fall back to 0 across [pi - delta, pi] with the same smoothstep.

This keeps 0 <= w0 <= 1, makes the leading small-x1 behavior cubic for
every x2 (so d_x1 w0(0, x2) = 0), and the odd-odd periodic extension is
C^blend_order.  The sine-series representation is obtained by the forward
transform followed by an exact projection onto the derivative-degeneracy
constraint (the projection only moves coefficients by the truncation
residual).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from .spectral import (GridField, MixedParityField, SineField, forward_transform,
                       grid_coordinates)

__all__ = ["InitialDataSpec", "smoothstep", "build_omega0", "check_degeneracy",
           "gradient_sup_norm", "plateau_deficit_fraction"]

DELTA_HARD_MAX = np.pi / 4


@dataclass(frozen=True)
class InitialDataSpec:
    """Parameters of the plateau construction.

    delta is the boundary strip width; delta_max (default pi/8, hard cap
    pi/4) guards the plateau margin.  origin_patch_radius (default
    delta/2) bounds the region where the monomial formula is exact.
    """

    delta: float
    n_modes: int
    n_grid: int
    origin_patch_radius: float | None = None
    blend_order: int = 4
    delta_max: float = np.pi / 8

    def __post_init__(self):
        if not self.delta_max < DELTA_HARD_MAX * (1 + 1e-12):
            raise ValueError(f"delta_max must be < pi/4, got {self.delta_max}")
        if not 0.0 < self.delta <= self.delta_max:
            raise ValueError(
                f"delta must lie in (0, delta_max={self.delta_max:.4g}], got {self.delta}")
        patch = self.patch
        if not 0.0 < patch <= self.delta / 2 * (1 + 1e-12):
            raise ValueError(
                f"origin_patch_radius must lie in (0, delta/2], got {patch}")
        if self.blend_order < 1:
            raise ValueError("blend_order must be >= 1")
        if self.n_grid < 2 * self.n_modes:
            raise ValueError(f"n_grid={self.n_grid} < 2*N={2 * self.n_modes}")
        if self.n_grid * self.delta / np.pi < 8:
            warnings.warn(
                f"delta={self.delta:.4g} spans fewer than 8 grid cells at "
                f"n_grid={self.n_grid}; construction is under-resolved")

    @property
    def patch(self) -> float:
        return self.delta / 2 if self.origin_patch_radius is None else self.origin_patch_radius

    def as_dict(self) -> dict:
        return {"delta": self.delta, "n_modes": self.n_modes, "n_grid": self.n_grid,
                "origin_patch_radius": self.patch, "blend_order": self.blend_order,
                "delta_max": self.delta_max}


def smoothstep(u, order: int):
    """Polynomial step 0 -> 1 on [0, 1] with `order` vanishing derivatives
    at both ends (C^order contact); clamps outside [0, 1]."""
    u = np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)
    n = order
    acc = np.zeros_like(u)
    for j in range(n + 1):
        acc += comb(n + j, j, exact=True) * comb(2 * n + 1, n - j, exact=True) * (-u) ** j
    return u ** (n + 1) * acc


def _axis_profile(t: np.ndarray, delta: float, patch: float, order: int,
                  power: int) -> np.ndarray:
    """1D profile: (t/delta)^power up to patch, blend to 1 by delta,
    plateau, smoothstep descent to 0 on [pi - delta, pi]."""
    rise = (t / delta) ** power
    s = smoothstep((t - patch) / (delta - patch), order)
    out = np.where(t < delta, rise * (1.0 - s) + s, 1.0)
    fall = smoothstep((np.pi - t) / delta, order)
    return np.where(t > np.pi - delta, fall, out)


def _project_degenerate(field: SineField) -> SineField:
    """Exactly zero the x1-derivative on the x2-axis.

    d1 f(0, x2) = sum_n (sum_m m a[m,n]) sin(n x2); remove the component of
    each coefficient column along the mode-number vector.
    """
    c = field.coeffs.copy()
    m = np.arange(1, c.shape[0] + 1, dtype=np.float64)
    w = m @ c                       # per-column axis derivative coefficients
    c -= np.outer(m, w) / np.sum(m * m)
    return SineField(c)


def build_omega0(spec: InitialDataSpec) -> SineField:
    """Construct the initial vorticity as a SineField."""
    x = grid_coordinates(spec.n_grid)
    u = _axis_profile(x, spec.delta, spec.patch, spec.blend_order, 3)
    v = _axis_profile(x, spec.delta, spec.patch, spec.blend_order, 1)
    grid = GridField(np.outer(u, v))
    return _project_degenerate(forward_transform(grid, spec.n_modes))


def check_degeneracy(omega: SineField, n_samples: int = 2048) -> float:
    """max over x2 of |d_x1 omega(0, x2)|, from the coefficients."""
    m = np.arange(1, omega.n_modes + 1, dtype=np.float64)
    w = m @ omega.coeffs
    x2 = np.pi * np.arange(n_samples) / n_samples
    vals = np.sin(np.outer(x2, np.arange(1, omega.n_modes + 1))) @ w
    return float(np.abs(vals).max())


def gradient_sup_norm(omega: SineField, n_grid: int) -> float:
    """Max over grid points of max(|d1 omega|, |d2 omega|)."""
    n = omega.n_modes
    modes = np.arange(1, n + 1, dtype=np.float64)
    d1 = MixedParityField(omega.coeffs * modes[:, None], ("cos", "sin"))
    d2 = MixedParityField(omega.coeffs * modes[None, :], ("sin", "cos"))
    return max(float(np.abs(d1.evaluate(n_grid).values).max()),
               float(np.abs(d2.evaluate(n_grid).values).max()))


def plateau_deficit_fraction(omega: SineField, n_grid: int, tol: float = 1e-3) -> float:
    """Fraction of collocation cells where omega < 1 - tol.

    tol absorbs the series-truncation ripple on the plateau (otherwise
    half the plateau cells sit marginally below 1)."""
    from .spectral import inverse_transform

    vals = inverse_transform(omega, n_grid).values
    return float(np.count_nonzero(vals < 1.0 - tol)) / vals.size
