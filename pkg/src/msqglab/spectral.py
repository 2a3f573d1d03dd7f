"""Double sine-series fields on the odd-odd symmetric torus.

Scalar fields are represented as

    f(x1, x2) = sum_{m,n >= 1} a[m,n] sin(m x1) sin(n x2),

which makes them odd in both coordinates and 2*pi-periodic by construction.
The collocation grid is the uniform grid x_i = pi*i/N_g, i = 0..N_g-1 of
[0, pi)^2; grid values on the boundary rows x1 = 0 / x2 = 0 vanish exactly.

Transforms are DST-I/DCT-I based (scipy.fft), so a grid of N_g points maps
to FFTs of length 2*N_g: powers of two are fastest.  Derivatives flip the
parity of the differentiated axis (sin -> cos for odd order), tracked by
MixedParityField.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

__all__ = [
    "SineField",
    "GridField",
    "MixedParityField",
    "VelocityField",
    "forward_transform",
    "inverse_transform",
    "fractional_inverse_laplacian",
    "spectral_derivative",
    "velocity_from_vorticity",
    "velocity_coefficients",
    "evaluate_offgrid",
    "hessian_sup_norm",
    "l2_norm",
    "grid_max_abs",
    "grid_coordinates",
    "get_workers",
]

MIN_MODES = 4


def get_workers() -> int:
    """Thread count for FFT work, from MSQGLAB_THREADS (default: all cores)."""
    env = os.environ.get("MSQGLAB_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return os.cpu_count() or 1


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.isfinite(arr).all():
        bad = int(np.count_nonzero(~np.isfinite(arr)))
        raise ValueError(f"{what} contains {bad} non-finite entries")


@dataclass(frozen=True)
class SineField:
    """Coefficients a[m-1, n-1] of a double sine series, 1 <= m, n <= N."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"coefficient array must be square 2D, got shape {c.shape}")
        if c.shape[0] < MIN_MODES:
            raise ValueError(f"truncation order must be >= {MIN_MODES}, got {c.shape[0]}")
        _check_finite(c, "coefficient array")
        object.__setattr__(self, "coeffs", c)

    @property
    def n_modes(self) -> int:
        return self.coeffs.shape[0]

    @classmethod
    def zeros(cls, n_modes: int) -> "SineField":
        return cls(np.zeros((n_modes, n_modes)))

    @classmethod
    def from_modes(cls, modes: dict, n_modes: int) -> "SineField":
        """Build from a sparse {(m, n): amplitude} dict (1-based mode indices)."""
        c = np.zeros((n_modes, n_modes))
        for (m, n), amp in modes.items():
            if not (1 <= m <= n_modes and 1 <= n <= n_modes):
                raise ValueError(f"mode ({m}, {n}) outside truncation order {n_modes}")
            c[m - 1, n - 1] = amp
        return cls(c)


@dataclass(frozen=True)
class GridField:
    """Sample values on the uniform (N_g x N_g) collocation grid of [0, pi)^2."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"grid array must be square 2D, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def n_grid(self) -> int:
        return self.values.shape[0]


def grid_coordinates(n_grid: int) -> np.ndarray:
    """1D collocation coordinates pi*i/N_g, i = 0..N_g-1."""
    return np.pi * np.arange(n_grid) / n_grid


def _eval_sin_axis(coeffs: np.ndarray, n_grid: int, axis: int) -> np.ndarray:
    """Evaluate a sine expansion along one axis on the collocation grid.

    Input length along `axis` is the number of sine modes; output length is
    n_grid with an exact zero at grid index 0.
    """
    n = coeffs.shape[axis]
    if n > n_grid - 1:
        raise ValueError(f"{n} sine modes do not fit on a {n_grid}-point grid")
    pad = [(0, 0)] * coeffs.ndim
    pad[axis] = (0, n_grid - 1 - n)
    padded = np.pad(coeffs, pad)
    interior = sfft.dst(padded, type=1, axis=axis, workers=get_workers()) / 2.0
    pad_zero = [(0, 0)] * coeffs.ndim
    pad_zero[axis] = (1, 0)
    return np.pad(interior, pad_zero)


def _eval_cos_axis(coeffs: np.ndarray, n_grid: int, axis: int) -> np.ndarray:
    """Evaluate a cosine expansion (modes m >= 1) along one axis on the grid."""
    n = coeffs.shape[axis]
    if n > n_grid - 1:
        raise ValueError(f"{n} cosine modes do not fit on a {n_grid}-point grid")
    pad = [(0, 0)] * coeffs.ndim
    pad[axis] = (1, n_grid - n)  # zero constant mode, zero-pad to length n_grid+1
    padded = np.pad(coeffs, pad)
    full = sfft.dct(padded, type=1, axis=axis, workers=get_workers()) / 2.0
    sl = [slice(None)] * coeffs.ndim
    sl[axis] = slice(0, n_grid)  # drop the x = pi endpoint
    return full[tuple(sl)]


@dataclass(frozen=True)
class MixedParityField:
    """Coefficient array in a mixed sin/cos tensor basis.

    parity is a pair from {"sin", "cos"}; mode indices start at 1 on both
    axes (derivatives of sine series never produce a constant mode).
    """

    coeffs: np.ndarray
    parity: tuple

    def __post_init__(self):
        if tuple(self.parity) not in {
            ("sin", "sin"), ("sin", "cos"), ("cos", "sin"), ("cos", "cos"),
        }:
            raise ValueError(f"invalid parity pair {self.parity}")
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=np.float64))
        object.__setattr__(self, "parity", tuple(self.parity))

    def evaluate(self, n_grid: int) -> GridField:
        """Evaluate on the N_g x N_g collocation grid."""
        ev = {"sin": _eval_sin_axis, "cos": _eval_cos_axis}
        out = ev[self.parity[0]](self.coeffs, n_grid, axis=0)
        out = ev[self.parity[1]](out, n_grid, axis=1)
        return GridField(out)

    def evaluate_at(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at arbitrary points, shape (..., 2), by direct summation."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        n = self.coeffs.shape[0]
        modes = np.arange(1, n + 1)
        fn = {"sin": np.sin, "cos": np.cos}
        b1 = fn[self.parity[0]](np.outer(pts[:, 0], modes))
        b2 = fn[self.parity[1]](np.outer(pts[:, 1], modes))
        vals = np.einsum("pm,mn,pn->p", b1, self.coeffs, b2)
        if np.asarray(points).ndim == 1:
            return float(vals[0])
        return vals


@dataclass(frozen=True)
class VelocityField:
    """Grid-sampled velocity components with their parities.

    u1 is odd in x1 / even in x2 on the full torus; u2 the reverse.
    """

    u1: GridField
    u2: GridField
    alpha: float


def inverse_transform(field: SineField, n_grid: int) -> GridField:
    """Evaluate the sine series on the collocation grid (pointwise exact)."""
    if n_grid < 2 * field.n_modes:
        raise ValueError(f"n_grid={n_grid} < 2*N={2 * field.n_modes}")
    return MixedParityField(field.coeffs, ("sin", "sin")).evaluate(n_grid)


def forward_transform(grid: GridField, n_modes: int) -> SineField:
    """Sine-series coefficients of the grid interpolant, truncated to N modes.

    For band-limited input (modes <= N) the round trip with
    inverse_transform reproduces the grid to rounding.
    """
    _check_finite(grid.values, "grid values")
    n_grid = grid.n_grid
    if n_grid < 2 * n_modes:
        raise ValueError(f"n_grid={n_grid} < 2*N={2 * n_modes}")
    interior = grid.values[1:, 1:]
    full = sfft.dstn(interior, type=1, workers=get_workers()) / n_grid**2
    return SineField(full[:n_modes, :n_modes].copy())


def _eigenvalues(n_modes: int) -> np.ndarray:
    m = np.arange(1, n_modes + 1)
    return m[:, None] ** 2 + m[None, :] ** 2


def fractional_inverse_laplacian(field: SineField, alpha: float) -> SineField:
    """Apply (-Laplace)^(-1+alpha): a[m,n] -> a[m,n] / (m^2+n^2)^(1-alpha).

    alpha = 0 is the plain inverse Laplacian (2D Euler stream function);
    alpha must lie in [0, 1).
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must be in [0, 1), got {alpha}")
    return SineField(field.coeffs / _eigenvalues(field.n_modes) ** (1.0 - alpha))


def spectral_derivative(field: SineField, axis: int, order: int) -> MixedParityField:
    """Term-by-term derivative of the sine series along axis 1 or 2.

    Odd order flips sin -> cos on the differentiated axis; the returned
    coefficients carry the mode-number factors (exact differentiation).
    """
    if axis not in (1, 2):
        raise ValueError(f"axis must be 1 or 2, got {axis}")
    if order not in (1, 2):
        raise ValueError(f"derivative order must be 1 or 2, got {order}")
    n = field.n_modes
    modes = np.arange(1, n + 1, dtype=np.float64)
    fac = modes.reshape((n, 1) if axis == 1 else (1, n))
    if order == 1:
        parity = ("cos", "sin") if axis == 1 else ("sin", "cos")
        return MixedParityField(field.coeffs * fac, parity)
    return MixedParityField(-field.coeffs * fac**2, ("sin", "sin"))


def velocity_coefficients(omega: SineField, alpha: float):
    """Coefficient-space velocity u = grad^perp psi, psi = (-Lap)^(-1+alpha) omega.

    Returns (u1, u2) as MixedParityFields: u1 = -d2 psi in the (sin, cos)
    basis, u2 = d1 psi in the (cos, sin) basis.  The sign convention makes
    u1 <= 0, u2 >= 0 near the origin for omega >= 0 on (0, pi)^2.
    """
    psi = fractional_inverse_laplacian(omega, alpha)
    n = psi.n_modes
    modes = np.arange(1, n + 1, dtype=np.float64)
    u1 = MixedParityField(-psi.coeffs * modes[None, :], ("sin", "cos"))
    u2 = MixedParityField(psi.coeffs * modes[:, None], ("cos", "sin"))
    return u1, u2


def velocity_from_vorticity(omega: SineField, alpha: float, n_grid: int) -> VelocityField:
    """Velocity law evaluated on the collocation grid."""
    u1c, u2c = velocity_coefficients(omega, alpha)
    return VelocityField(u1c.evaluate(n_grid), u2c.evaluate(n_grid), alpha)


def evaluate_offgrid(field: SineField, x) -> np.ndarray:
    """Direct sine-series summation at arbitrary points (periodic extension).

    Accepts a single (x1, x2) point or an (..., 2) array.
    """
    return MixedParityField(field.coeffs, ("sin", "sin")).evaluate_at(x)


def hessian_sup_norm(omega: SineField, n_grid: int) -> float:
    """Max over grid points of the largest |entry| of the Hessian of omega.

    Collocation-grid maximization: a lower bound for the true sup norm that
    converges as n_grid grows.
    """
    n = omega.n_modes
    modes = np.arange(1, n + 1, dtype=np.float64)
    d11 = MixedParityField(-omega.coeffs * modes[:, None] ** 2, ("sin", "sin"))
    d22 = MixedParityField(-omega.coeffs * modes[None, :] ** 2, ("sin", "sin"))
    d12 = MixedParityField(omega.coeffs * modes[:, None] * modes[None, :], ("cos", "cos"))
    best = 0.0
    for d in (d11, d12, d22):
        best = max(best, float(np.abs(d.evaluate(n_grid).values).max()))
    return best


def l2_norm(field: SineField) -> float:
    """L2 norm over [0, pi]^2 via Parseval: ||f||^2 = (pi^2/4) sum a^2."""
    return float(np.pi / 2.0 * np.linalg.norm(field.coeffs))


def grid_max_abs(field: SineField, n_grid: int) -> float:
    """Max of |f| over the collocation grid."""
    return float(np.abs(inverse_transform(field, n_grid).values).max())
