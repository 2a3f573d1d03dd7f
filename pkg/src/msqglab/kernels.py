"""Symmetrized Biot-Savart kernels and direct velocity quadrature.

The odd-odd symmetrization folds the plane integral into the first quadrant
with image charges at x_tilde = (-x1, x2), x_bar = (x1, -x2) and -x:

    u1(x) =  int K1(x, y) omega(y) dy,
    u2(x) =  int K2(x, y) omega(y) dy,       y in [0, inf)^2,

where K1 carries (x2 -+ y2) differences over |.|^(2+2a) distances and K2 the
x1 analogue with an overall minus sign (K2(x, y) = -K1(swap x, swap y)).
The kernels drop the alpha-dependent Biot-Savart prefactor; a calibration
scalar fitted against the spectral path (or the closed-form Riesz
normalization) restores physical units.

Quadrature is the midpoint rule on axis-aligned rectangles.  Regions:

    near(L):   [0, L|x|]^2
    medium(L): [0, pi)^2 minus the near square, covered by dyadic frames so
               the inner scale is always resolved (each frame is split into
               three rectangles whose node multiset is swap-symmetric)
    far:       periodic image cells [0, R*pi)^2 minus the central cell, with
               optional Richardson tail extrapolation (tail is O(R^-2a))
    full:      central cell + far

The principal-value singularity at y = x (needed for alpha >= 1/2, harmless
otherwise) is handled on the rectangle containing x: nodes within pv_radius
are either excluded symmetrically (disk or square) or, by default, the
singular first term is Taylor-subtracted there and its disk integral against
the linearization of omega added back in closed form.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gamma as _gamma

from .spectral import SineField

__all__ = [
    "KernelParams",
    "RegionSpec",
    "ReflectedPoint",
    "kernel_K1",
    "kernel_K2",
    "asymptotic_K",
    "relative_kernel_error",
    "velocity_quadrature",
    "QuadratureOracle",
    "fit_calibration",
    "CalibrationResult",
    "riesz_velocity_prefactor",
]

_PV_MODES = ("subtract", "exclude_disk", "exclude_square")


@dataclass(frozen=True)
class KernelParams:
    """Quadrature controls for the kernel oracle.

    pv_mode selects the principal-value realization at y = x: "subtract"
    (default; linearization subtracted and reintegrated exactly, accurate)
    or symmetric node exclusion on a disk/square of radius pv_radius_cells
    local cells (kept <= 8 so the patch stays local; biased by
    O(rho^(2-2alpha)), reported for sensitivity).  image_radius is the
    number of periodic image cells summed per direction; the neglected
    tail is O(image_radius^-2alpha), which converges since alpha > 0.
    """

    alpha: float
    pv_radius_cells: float = 2.0
    image_radius: int = 8
    pv_mode: str = "subtract"
    tail_extrapolate: bool = False
    cells_central: int = 256
    cells_panel: int = 128
    cells_far: int = 64

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"kernel alpha must be in (0, 1), got {self.alpha}")
        if not 0.0 < self.pv_radius_cells <= 8.0:
            raise ValueError("pv_radius_cells must be in (0, 8]")
        if self.image_radius < 1:
            raise ValueError("image_radius must be >= 1")
        if self.pv_mode not in _PV_MODES:
            raise ValueError(f"pv_mode must be one of {_PV_MODES}")
        for name in ("cells_central", "cells_panel", "cells_far"):
            if getattr(self, name) < 8:
                raise ValueError(f"{name} must be >= 8")


@dataclass(frozen=True)
class RegionSpec:
    """Integration region; L (>= 2) sets the near/medium split at L|x|."""

    kind: str
    L: float = 0.0

    def __post_init__(self):
        if self.kind not in ("near", "medium", "far", "full"):
            raise ValueError(f"unknown region kind {self.kind!r}")
        if self.kind in ("near", "medium") and self.L < 2.0:
            raise ValueError(f"{self.kind} region requires L >= 2, got {self.L}")


@dataclass(frozen=True)
class ReflectedPoint:
    """x with its three reflections, derived deterministically."""

    x: tuple
    x_tilde: tuple
    x_bar: tuple
    minus_x: tuple

    @classmethod
    def from_point(cls, x) -> "ReflectedPoint":
        x1, x2 = float(x[0]), float(x[1])
        return cls((x1, x2), (-x1, x2), (x1, -x2), (-x1, -x2))


def _distances_sq(x1, x2, y1, y2):
    d0 = (x1 - y1) ** 2 + (x2 - y2) ** 2   # |x - y|^2
    dt = (x1 + y1) ** 2 + (x2 - y2) ** 2   # |x_tilde - y|^2
    db = (x1 - y1) ** 2 + (x2 + y2) ** 2   # |x_bar - y|^2
    dp = (x1 + y1) ** 2 + (x2 + y2) ** 2   # |x + y|^2
    return d0, dt, db, dp


def kernel_K1(x, y, alpha: float):
    """Four-term symmetrized kernel for u1; y may be an (..., 2) array."""
    y = np.asarray(y, dtype=np.float64)
    x1, x2 = float(x[0]), float(x[1])
    y1, y2 = y[..., 0], y[..., 1]
    d0, dt, db, dp = _distances_sq(x1, x2, y1, y2)
    if np.any(d0 == 0.0):
        raise ValueError("kernel_K1 evaluated at y = x; caller must exclude the singularity")
    p = 1.0 + alpha
    return ((x2 - y2) * d0**-p - (x2 - y2) * dt**-p
            - (x2 + y2) * db**-p + (x2 + y2) * dp**-p)


def kernel_K2(x, y, alpha: float):
    """Four-term symmetrized kernel for u2 (overall minus sign)."""
    y = np.asarray(y, dtype=np.float64)
    x1, x2 = float(x[0]), float(x[1])
    y1, y2 = y[..., 0], y[..., 1]
    d0, dt, db, dp = _distances_sq(x1, x2, y1, y2)
    if np.any(d0 == 0.0):
        raise ValueError("kernel_K2 evaluated at y = x; caller must exclude the singularity")
    p = 1.0 + alpha
    return -((x1 - y1) * d0**-p - (x1 - y1) * db**-p
             - (x1 + y1) * dt**-p + (x1 + y1) * dp**-p)


def asymptotic_K(j: int, x, y, alpha: float):
    """Large-|y|/|x| form: (-1)^j * 8(1+alpha) * x_j y1 y2 |y|^(-4-2alpha)."""
    if j not in (1, 2):
        raise ValueError(f"component j must be 1 or 2, got {j}")
    y = np.asarray(y, dtype=np.float64)
    y1, y2 = y[..., 0], y[..., 1]
    xj = float(x[0]) if j == 1 else float(x[1])
    sign = -1.0 if j == 1 else 1.0
    return sign * 8.0 * (1.0 + alpha) * xj * y1 * y2 * (y1**2 + y2**2) ** (-(2.0 + alpha))


def relative_kernel_error(j: int, x, y, alpha: float):
    """f_j = K_j / asymptotic - 1; rejects zero asymptotic denominators."""
    a = asymptotic_K(j, x, y, alpha)
    if np.any(a == 0.0):
        raise ValueError("asymptotic kernel vanishes for some sample; pick x_j, y1, y2 != 0")
    k = kernel_K1(x, y, alpha) if j == 1 else kernel_K2(x, y, alpha)
    return k / a - 1.0


def riesz_velocity_prefactor(alpha: float) -> float:
    """Free-space normalization relating the bare kernels to grad^perp
    (-Laplace)^(-1+alpha): c_alpha = 2 Gamma(1+alpha) / (4^(1-alpha) pi Gamma(1-alpha)).

    For alpha = 1/2 this is 1/(2 pi).  The fitted calibration constant should
    match this up to quadrature and image-truncation error.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    return float(2.0 * _gamma(1.0 + alpha) / (4.0 ** (1.0 - alpha) * np.pi * _gamma(1.0 - alpha)))


class _FieldSampler:
    """Evaluates a SineField and its gradient at arbitrary coordinates."""

    def __init__(self, omega: SineField):
        self.coeffs = omega.coeffs
        self.modes = np.arange(1, omega.n_modes + 1, dtype=np.float64)

    def values(self, y1: np.ndarray, y2: np.ndarray) -> np.ndarray:
        """Tensor-grid values, shape (len(y1), len(y2))."""
        s1 = np.sin(np.outer(y1, self.modes))
        s2 = np.sin(np.outer(y2, self.modes))
        return s1 @ self.coeffs @ s2.T

    def value(self, x) -> float:
        return float(self.values(np.array([x[0]]), np.array([x[1]]))[0, 0])

    def grad(self, x):
        c1 = np.cos(self.modes * x[0])
        s1 = np.sin(self.modes * x[0])
        c2 = np.cos(self.modes * x[1])
        s2 = np.sin(self.modes * x[1])
        d1 = (self.modes * c1) @ self.coeffs @ s2
        d2 = s1 @ self.coeffs @ (self.modes * c2)
        return float(d1), float(d2)


def _midpoints(a: float, b: float, n: int):
    h = (b - a) / n
    return a + (np.arange(n) + 0.5) * h, h


def _linear_pv_integrals(x, rect, alpha: float, w0: float, g1: float, g2: float):
    """Exact integrals of the singular kernel terms against w0 + g . (y - x).

    Computes I_j = int_rect T_j(y) (w0 + g1 (y1-x1) + g2 (y2-x2)) dy for
    T_1 = (x2-y2) |x-y|^(-2-2a) and T_2 = (y1-x1) |x-y|^(-2-2a), with x
    strictly inside the rectangle, in the principal-value sense.  Every
    piece reduces to a 1D integral of a smooth function over one rectangle
    edge (antiderivative in one variable plus the divergence theorem for
    the |x-y|^(-2a) bulk term), evaluated adaptively.
    """
    from scipy.integrate import quad

    x1, x2 = x
    a1, b1, a2, b2 = rect
    two_a = 2.0 * alpha

    def rpow(y1, y2):
        return ((y1 - x1) ** 2 + (y2 - x2) ** 2) ** (-alpha)

    def q(f, a, b, interior_pt):
        pts = [interior_pt] if a < interior_pt < b else None
        return quad(f, a, b, points=pts, limit=400)[0]

    e1 = q(lambda t: rpow(t, b2) - rpow(t, a2), a1, b1, x1)
    e1w = q(lambda t: (t - x1) * (rpow(t, b2) - rpow(t, a2)), a1, b1, x1)
    e2 = q(lambda t: rpow(b1, t) - rpow(a1, t), a2, b2, x2)
    e2w = q(lambda t: (t - x2) * (rpow(b1, t) - rpow(a1, t)), a2, b2, x2)
    jv = q(lambda t: (b1 - x1) * rpow(b1, t) + (x1 - a1) * rpow(a1, t), a2, b2, x2)
    jh = q(lambda t: (b2 - x2) * rpow(t, b2) + (x2 - a2) * rpow(t, a2), a1, b1, x1)
    j_bulk = (jv + jh) / (2.0 - two_a)

    int_t1 = e1 / two_a                  # (x2-y2) r^(-2-2a)
    int_t1_y1 = e1w / two_a              # (x2-y2)(y1-x1) r^(-2-2a)
    int_t2 = -e2 / two_a                 # (y1-x1) r^(-2-2a)
    int_cross = -e2w / two_a             # (y1-x1)(y2-x2) r^(-2-2a)
    int_y2sq = (j_bulk - jh) / two_a     # (y2-x2)^2 r^(-2-2a)
    int_y1sq = (j_bulk - jv) / two_a     # (y1-x1)^2 r^(-2-2a)

    i1 = w0 * int_t1 + g1 * int_t1_y1 - g2 * int_y2sq
    i2 = w0 * int_t2 + g1 * int_y1sq + g2 * int_cross
    return i1, i2


class QuadratureOracle:
    """Kernel-quadrature velocity for one vorticity field.

    Caches the central-cell and image-cell sample grids, so sweeps over many
    evaluation points reuse the omega sampling.  All reductions are plain
    numpy sums (pairwise, deterministic for a fixed partition).
    """

    def __init__(self, omega: SineField, params: KernelParams):
        self.omega = omega
        self.params = params
        self._sampler = _FieldSampler(omega)
        self._central_cache = None
        self._far_cache = None

    # -- omega sampling -------------------------------------------------

    def _central_nodes(self):
        if self._central_cache is None:
            y, h = _midpoints(0.0, np.pi, self.params.cells_central)
            self._central_cache = (y, h, self._sampler.values(y, y))
        return self._central_cache

    def _far_base(self):
        if self._far_cache is None:
            t, h = _midpoints(0.0, np.pi, self.params.cells_far)
            self._far_cache = (t, h, self._sampler.values(t, t))
        return self._far_cache

    # -- singular rectangle sum ------------------------------------------

    def _sum_rect(self, x, rect, n1, n2, w=None, y1=None, y2=None, pv=False):
        """Midpoint sum of (K1*w, K2*w) over rect = (a1, b1, a2, b2).

        If pv is set (x strictly inside the rectangle), the singular first
        term gets the principal-value treatment configured in params.
        """
        a1, b1, a2, b2 = rect
        alpha = self.params.alpha
        p = 1.0 + alpha
        if y1 is None:
            y1, h1 = _midpoints(a1, b1, n1)
            y2, h2 = _midpoints(a2, b2, n2)
            w = self._sampler.values(y1, y2)
        else:
            h1 = (b1 - a1) / n1
            h2 = (b2 - a2) / n2
        area = h1 * h2
        x1, x2 = float(x[0]), float(x[1])
        yy1 = y1[:, None]
        yy2 = y2[None, :]
        d0, dt, db, dp = _distances_sq(x1, x2, yy1, yy2)

        with np.errstate(divide="ignore"):
            inv0 = np.where(d0 > 0.0, d0, np.inf) ** -p
        hit = ~np.isfinite(inv0)
        if hit.any():
            inv0 = np.where(hit, 0.0, inv0)
        invt = dt**-p
        invb = db**-p
        invp = dp**-p

        # regular (image) terms, never singular inside the open quadrant
        u1 = -(x2 - yy2) * invt - (x2 + yy2) * invb + (x2 + yy2) * invp
        u2 = -(-(x1 - yy1) * invb - (x1 + yy1) * invt + (x1 + yy1) * invp)

        t1 = (x2 - yy2) * inv0   # singular first term of K1
        t2 = (yy1 - x1) * inv0   # singular first term of K2 (sign folded in)

        if not pv:
            u1_sum = float(np.sum((u1 + t1) * w)) * area
            u2_sum = float(np.sum((u2 + t2) * w)) * area
            return u1_sum, u2_sum

        if self.params.pv_mode == "subtract":
            # Subtract the linearization of omega from the singular term over
            # the whole rectangle and add its integral back semi-analytically.
            # The sampled residual (omega - P) * T is integrable and its
            # midpoint sum converges; a patch that scales with the cell size
            # would leave a resolution-independent ring error instead.
            u1_sum = float(np.sum(u1 * w)) * area
            u2_sum = float(np.sum(u2 * w)) * area
            g1, g2 = self._sampler.grad(x)
            w0 = self._sampler.value(x)
            taylor = w0 + g1 * (yy1 - x1) + g2 * (yy2 - x2)
            # the node at y = x (if any) was zeroed via inv0; its true
            # residual contribution is the integrable O(h^(3-2alpha)) cell
            u1_sum += float(np.sum(t1 * (w - taylor))) * area
            u2_sum += float(np.sum(t2 * (w - taylor))) * area
            i1, i2 = _linear_pv_integrals((x1, x2), rect, alpha, w0, g1, g2)
            u1_sum += i1
            u2_sum += i2
        else:
            # symmetric exclusion of all nodes within pv_radius of x; the PV
            # limit is realized as the symmetric-exclusion limit, at the cost
            # of an O(rho^(2-2alpha) * grad omega) bias
            h = max(h1, h2)
            edge = min(x1 - a1, b1 - x1, x2 - a2, b2 - x2)
            rho = min(self.params.pv_radius_cells * h, 0.9 * edge)
            if self.params.pv_mode == "exclude_square":
                mask = np.maximum(np.abs(yy1 - x1), np.abs(yy2 - x2)) < rho
            else:
                mask = d0 < rho**2
            wk = np.where(mask, 0.0, w)
            u1_sum = float(np.sum((u1 + t1) * wk)) * area
            u2_sum = float(np.sum((u2 + t2) * wk)) * area
        return u1_sum, u2_sum

    # -- regions ----------------------------------------------------------

    def _near(self, x, L):
        s = L * float(np.hypot(x[0], x[1]))
        if s <= 0.0:
            raise ValueError("near region is empty for x = 0")
        if s >= np.pi:
            raise ValueError(f"near square side L|x| = {s:.3g} >= pi")
        n = self.params.cells_panel
        return self._sum_rect(x, (0.0, s, 0.0, s), n, n, pv=self._inside(x, (0.0, s, 0.0, s)))

    def _medium_frames(self, s):
        """Dyadic frames covering [0, pi)^2 \\ [0, s]^2, each as three rects."""
        frames = []
        lo = s
        while lo < np.pi:
            hi = min(2.0 * lo, np.pi)
            frames.append((lo, hi))
            lo = hi
        return frames

    def _medium(self, x, L):
        s = L * float(np.hypot(x[0], x[1]))
        if s >= np.pi:
            raise ValueError(f"medium region is empty: L|x| = {s:.3g} >= pi")
        if s <= 0.0:
            raise ValueError("medium region requires x != 0")
        if L * float(np.hypot(x[0], x[1])) > 1.0:
            warnings.warn(f"L|x| = {s:.3g} > 1: medium-field scaling assumptions degrade")
        npanel = self.params.cells_panel
        u1 = u2 = 0.0
        for lo, hi in self._medium_frames(s):
            na = max(8, int(round(npanel * (hi - lo) / hi)))
            nb = max(8, int(round(npanel * lo / hi)))
            # [lo,hi] x [0,lo], its swap image, and the swap-invariant corner
            for rect, n1, n2 in (
                ((lo, hi, 0.0, lo), na, nb),
                ((0.0, lo, lo, hi), nb, na),
                ((lo, hi, lo, hi), na, na),
            ):
                du1, du2 = self._sum_rect(x, rect, n1, n2, pv=False)
                u1 += du1
                u2 += du2
        return u1, u2

    def _far(self, x, tail_extrapolate=None):
        if tail_extrapolate is None:
            tail_extrapolate = self.params.tail_extrapolate
        R = self.params.image_radius
        t, h, base = self._far_base()
        area = h * h
        alpha = self.params.alpha
        p = 1.0 + alpha
        x1, x2 = float(x[0]), float(x[1])
        u1 = u2 = 0.0
        u1_half = u2_half = 0.0
        r_half = R // 2
        for pcell in range(R):
            w1 = base[::-1, :] if pcell % 2 else base
            sgn1 = -1.0 if pcell % 2 else 1.0
            y1 = pcell * np.pi + t
            for qcell in range(R):
                if pcell == 0 and qcell == 0:
                    continue
                w = w1[:, ::-1] if qcell % 2 else w1
                sgn = sgn1 * (-1.0 if qcell % 2 else 1.0)
                y2 = qcell * np.pi + t
                yy1 = y1[:, None]
                yy2 = y2[None, :]
                d0, dt, db, dp = _distances_sq(x1, x2, yy1, yy2)
                k1 = ((x2 - yy2) * d0**-p - (x2 - yy2) * dt**-p
                      - (x2 + yy2) * db**-p + (x2 + yy2) * dp**-p)
                k2 = -((x1 - yy1) * d0**-p - (x1 - yy1) * db**-p
                       - (x1 + yy1) * dt**-p + (x1 + yy1) * dp**-p)
                du1 = sgn * float(np.sum(k1 * w)) * area
                du2 = sgn * float(np.sum(k2 * w)) * area
                u1 += du1
                u2 += du2
                if pcell < r_half and qcell < r_half:
                    u1_half += du1
                    u2_half += du2
        if tail_extrapolate and r_half >= 1 and R > r_half:
            fac = 1.0 / (2.0 ** (2.0 * alpha) - 1.0)
            u1 += (u1 - u1_half) * fac
            u2 += (u2 - u2_half) * fac
        return u1, u2

    def _central(self, x):
        y, h, w = self._central_nodes()
        n = self.params.cells_central
        if 0.0 < min(abs(x[0]), abs(x[1])) < 4.0 * h or np.hypot(x[0], x[1]) < 4.0 * h:
            warnings.warn(
                f"evaluation point {tuple(x)} within 4 central cells of an axis; "
                "full-region quadrature may be under-resolved")
        rect = (0.0, np.pi, 0.0, np.pi)
        return self._sum_rect(x, rect, n, n, w=w, y1=y, y2=y, pv=self._inside(x, rect))

    @staticmethod
    def _inside(x, rect):
        a1, b1, a2, b2 = rect
        return a1 < x[0] < b1 and a2 < x[1] < b2

    def velocity(self, x, region: RegionSpec):
        """Quadrature velocity contribution (u1, u2) of the given region."""
        if region.kind == "near":
            return self._near(x, region.L)
        if region.kind == "medium":
            return self._medium(x, region.L)
        if region.kind == "far":
            return self._far(x)
        c1, c2 = self._central(x)
        f1, f2 = self._far(x)
        return c1 + f1, c2 + f2


def velocity_quadrature(omega: SineField, x, params: KernelParams, region: RegionSpec):
    """One-shot region quadrature; use QuadratureOracle for sweeps."""
    return QuadratureOracle(omega, params).velocity(x, region)


@dataclass(frozen=True)
class CalibrationResult:
    c_alpha: float
    max_rel_dev: float
    n_points: int


def fit_calibration(omega: SineField, alpha: float, points, params: KernelParams,
                    oracle: QuadratureOracle | None = None) -> CalibrationResult:
    """Least-squares scalar c with  spectral_u ~= c * quadrature_u.

    The same c must fit both components at every point; max_rel_dev is the
    worst per-point relative error of the velocity vector,
    ||c*quad - spec|| / ||spec||.
    """
    from .spectral import velocity_coefficients

    pts = np.asarray(points, dtype=np.float64)
    if oracle is None:
        oracle = QuadratureOracle(omega, params)
    u1c, u2c = velocity_coefficients(omega, alpha)
    spec = np.stack([u1c.evaluate_at(pts), u2c.evaluate_at(pts)], axis=1)
    quad = np.array([oracle.velocity(p, RegionSpec("full")) for p in pts])
    c = float(np.sum(quad * spec) / np.sum(quad * quad))
    dev = float(np.max(np.linalg.norm(c * quad - spec, axis=1)
                       / np.linalg.norm(spec, axis=1)))
    return CalibrationResult(c, dev, len(pts))
