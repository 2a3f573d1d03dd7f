"""Characteristic tracing and growth diagnostics.

Traces dPhi/dt = u(Phi, t) with RK4 through velocity fields reconstructed
from stored vorticity snapshots (linear interpolation in time between
snapshots), monitors the component-ratio along the path, applies the
construction's stopping rule, and fits exponential growth rates.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .kernels import KernelParams, QuadratureOracle, RegionSpec
from .spectral import SineField, evaluate_offgrid, velocity_coefficients

__all__ = ["TrajectoryState", "GrowthRecord", "StartPoint", "VelocitySampler",
           "trace", "select_start", "stopping_time", "medium_ratio_monitor",
           "fit_gamma", "transport_defect"]

QUADRANT = (0.0, np.pi)


@dataclass(frozen=True)
class StartPoint:
    x1: float
    x2: float
    scaled_regime: bool
    note: str = ""

    @property
    def point(self):
        return (self.x1, self.x2)


@dataclass
class TrajectoryState:
    start: tuple
    times: np.ndarray
    positions: np.ndarray      # (n, 2)
    velocities: np.ndarray     # (n, 2)
    ratios: np.ndarray         # medium ratio r(t) where monitored, else nan
    halted: bool = False
    halt_note: str = ""


@dataclass(frozen=True)
class GrowthRecord:
    times: np.ndarray
    values: np.ndarray
    fitted_gamma: float
    fit_window: tuple
    fit_r2: float


class VelocitySampler:
    """u(x, t) from a time-ordered list of (time, omega) snapshots.

    Velocity coefficients are precomputed per snapshot (diagonal work);
    point evaluation is a direct mixed sine/cosine series sum, linear in
    time between the bracketing snapshots.
    """

    def __init__(self, snapshots, alpha: float):
        if not snapshots:
            raise ValueError("no snapshots supplied")
        times, fields = zip(*sorted(snapshots, key=lambda p: p[0]))
        self.times = np.asarray(times, dtype=np.float64)
        self.alpha = alpha
        self._u1 = []
        self._u2 = []
        for f in fields:
            u1c, u2c = velocity_coefficients(f, alpha)
            self._u1.append(u1c.coeffs)
            self._u2.append(u2c.coeffs)
        self.n_modes = fields[0].n_modes
        self._modes = np.arange(1, self.n_modes + 1, dtype=np.float64)

    def _eval(self, idx: int, x) -> np.ndarray:
        s1 = np.sin(self._modes * x[0])
        c1 = np.cos(self._modes * x[0])
        s2 = np.sin(self._modes * x[1])
        c2 = np.cos(self._modes * x[1])
        return np.array([s1 @ self._u1[idx] @ c2, c1 @ self._u2[idx] @ s2])

    def __call__(self, x, t: float) -> np.ndarray:
        ts = self.times
        if t <= ts[0]:
            return self._eval(0, x)
        if t >= ts[-1]:
            return self._eval(len(ts) - 1, x)
        hi = int(np.searchsorted(ts, t, side="right"))
        lo = hi - 1
        th = (t - ts[lo]) / (ts[hi] - ts[lo])
        return (1.0 - th) * self._eval(lo, x) + th * self._eval(hi, x)


def trace(start, velocity_source, t_end: float, dt: float,
          t_start: float = 0.0, pos_tol: float = 1e-6) -> TrajectoryState:
    """RK4 integration of the characteristic ODE, history at every step.

    Halts with a diagnostic if the position leaves [0, pi)^2 by more than
    pos_tol (the quadrant is invariant for the exact flow; leaving it
    signals interpolation/resolution loss).
    """
    if dt <= 0 or t_end < t_start:
        raise ValueError("need dt > 0 and t_end >= t_start")
    x = np.array(start, dtype=np.float64)
    if not (0 < x[0] < np.pi and 0 < x[1] < np.pi):
        raise ValueError(f"start {tuple(x)} outside the open quadrant")
    times = [t_start]
    pos = [x.copy()]
    vel = [np.asarray(velocity_source(x, t_start), dtype=np.float64)]
    halted = False
    note = ""
    t = t_start
    n_steps = int(np.ceil((t_end - t_start) / dt - 1e-12))
    for _ in range(n_steps):
        h = min(dt, t_end - t)
        k1 = np.asarray(velocity_source(x, t))
        k2 = np.asarray(velocity_source(x + 0.5 * h * k1, t + 0.5 * h))
        k3 = np.asarray(velocity_source(x + 0.5 * h * k2, t + 0.5 * h))
        k4 = np.asarray(velocity_source(x + h * k3, t + h))
        x = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t + h
        if (x[0] < QUADRANT[0] - pos_tol or x[1] < QUADRANT[0] - pos_tol
                or x[0] > QUADRANT[1] + pos_tol or x[1] > QUADRANT[1] + pos_tol):
            halted = True
            note = (f"trajectory left [0, pi)^2 at t={t:.6f}, x={tuple(x)}; "
                    "quadrant invariance violated beyond tolerance")
            times.append(t)
            pos.append(x.copy())
            vel.append(np.asarray(velocity_source(x, t)))
            break
        times.append(t)
        pos.append(x.copy())
        vel.append(np.asarray(velocity_source(x, t)))
    traj = TrajectoryState(
        start=tuple(np.atleast_1d(start)[:2]),
        times=np.array(times), positions=np.array(pos),
        velocities=np.array(vel),
        ratios=np.full(len(times), np.nan),
        halted=halted, halt_note=note)
    return traj


def select_start(T: float, delta: float, alpha: float, beta: float,
                 grid_floor: float) -> StartPoint:
    """Construction start point x1 = exp(-T delta^(-a/2)), x2 = x1^beta.

    The asymptotic choice underflows desk-scale grids quickly; when the
    resolvable-coordinate floor binds, x1 is clamped there and the result
    is flagged as the scaled regime.
    """
    raw = float(np.exp(-T * delta ** (-alpha / 2.0)))
    scaled = raw < grid_floor
    x1 = max(raw, grid_floor)
    x2 = x1 ** beta
    note = ""
    if scaled:
        note = (f"asymptotic x1={raw:.3e} below the grid floor {grid_floor:.3e}; "
                "running in the scaled regime")
    if x2 < grid_floor:
        note += ("" if not note else " ") + (
            f"x2={x2:.3e} is below the grid floor (flagged, not clamped)")
    return StartPoint(x1, x2, scaled, note)


def stopping_time(trajectory: TrajectoryState, hessian_times, hessian_values,
                  T: float, x1_0: float, growth_threshold: float):
    """First trigger among: t = T, x2(t) >= x1_0, hessian >= threshold.

    Returns (T0, reason) with reason in {"horizon", "x2_reaches_x10",
    "hessian_threshold"}; times are reported at sample resolution.
    """
    t_x2 = np.inf
    hit = np.nonzero(trajectory.positions[:, 1] >= x1_0)[0]
    if hit.size:
        t_x2 = float(trajectory.times[hit[0]])
    t_h = np.inf
    hv = np.asarray(hessian_values, dtype=np.float64)
    ht = np.asarray(hessian_times, dtype=np.float64)
    hh = np.nonzero(hv >= growth_threshold)[0]
    if hh.size:
        t_h = float(ht[hh[0]])
    t0 = min(T, t_x2, t_h)
    if t0 == T and T <= min(t_x2, t_h):
        return T, "horizon"
    if t_x2 <= t_h:
        return t_x2, "x2_reaches_x10"
    return t_h, "hessian_threshold"


def medium_ratio_monitor(trajectory: TrajectoryState, snapshots, alpha: float,
                         L: float, params: KernelParams | None = None,
                         every: int = 10) -> TrajectoryState:
    """Fill r(t) = -u1_med x2 / (x1 u2_med) along the path where L|x| <= 1.

    Uses the snapshot nearest in time for the quadrature field; skipped
    samples (L|x| > 1 or empty region) stay nan and are noted.
    """
    params = params or KernelParams(alpha=alpha)
    times = np.asarray([t for t, _ in snapshots], dtype=np.float64)
    oracles = {}
    skipped = 0
    ratios = trajectory.ratios.copy()
    for i in range(0, len(trajectory.times), every):
        x = trajectory.positions[i]
        t = trajectory.times[i]
        if L * float(np.hypot(*x)) > 1.0 or min(x) <= 0:
            skipped += 1
            continue
        j = int(np.argmin(np.abs(times - t)))
        if j not in oracles:
            oracles[j] = QuadratureOracle(snapshots[j][1], params)
        u1, u2 = oracles[j].velocity(x, RegionSpec("medium", L))
        if u2 == 0.0:
            skipped += 1
            continue
        ratios[i] = -u1 * x[1] / (x[0] * u2)
    out = TrajectoryState(trajectory.start, trajectory.times,
                          trajectory.positions, trajectory.velocities,
                          ratios, trajectory.halted, trajectory.halt_note)
    if skipped:
        out.halt_note = (trajectory.halt_note + f" [{skipped} ratio samples "
                         "skipped: outside the medium-field regime]").strip()
    return out


def fit_gamma(times, values, window: tuple | None = None,
              min_samples: int = 10) -> GrowthRecord:
    """Least-squares slope of log(values) vs time on the fit window.

    Default window drops the first 10% of the series as transient.  The
    fit is affine-equivariant: scaling values by a positive constant does
    not change gamma.
    """
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if np.any(values <= 0):
        raise ValueError("growth fit requires strictly positive values")
    if window is None:
        window = (times[0] + 0.1 * (times[-1] - times[0]), times[-1])
    sel = (times >= window[0]) & (times <= window[1])
    if int(np.count_nonzero(sel)) < min_samples:
        raise ValueError(
            f"only {int(np.count_nonzero(sel))} samples in fit window {window}; "
            f"need >= {min_samples}")
    t, y = times[sel], np.log(values[sel])
    a = np.vstack([t, np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    pred = a @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum((y - pred) ** 2)) / ss_tot
    if ss_tot == 0.0 and abs(coef[0]) < 1e-14:
        r2 = 1.0
    return GrowthRecord(times[sel], values[sel], float(coef[0]),
                        (float(window[0]), float(window[1])), r2)


def transport_defect(trajectory: TrajectoryState, snapshots, omega0_at_start: float):
    """max_t |omega(Phi_t, t) - omega0(start)| along a traced path."""
    times = np.asarray([t for t, _ in snapshots], dtype=np.float64)
    worst = 0.0
    for i, t in enumerate(trajectory.times):
        j = int(np.argmin(np.abs(times - t)))
        val = evaluate_offgrid(snapshots[j][1], trajectory.positions[i])
        worst = max(worst, abs(float(val) - omega0_at_start))
    return worst
