"""Pseudo-spectral time integration of the active-scalar transport law.

d_t omega + (u . grad) omega = 0 with u = grad^perp (-Lap)^(-1+alpha) omega,
advanced by classical RK4 on the sine coefficients.  The nonlinear term is
formed pointwise on the n_grid collocation grid and truncated back to the
N x N band; with n_grid >= 2N the retained band is alias-free.  The odd-odd
symmetry class is exact by representation.

No dissipation is applied by default (the equation is conservative); an
optional high-order spectral filter exists for long runs and its use is
recorded in the run metadata.  Loss of resolution is a reportable outcome
("resolution_exhausted"), not an error.
"""

from __future__ import annotations

import csv
import json
import time as _time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .initial_data import InitialDataSpec, build_omega0, check_degeneracy, gradient_sup_norm
from .snapshots import write_snapshot
from .spectral import (GridField, MixedParityField, SineField, forward_transform,
                       hessian_sup_norm, l2_norm, velocity_coefficients, VelocityField)
from .trajectories import fit_gamma

__all__ = ["ExperimentConfig", "SimState", "DiagnosticsRecord", "RunResult",
           "nonlinear_term", "step_rk4", "cfl_dt", "run"]


@dataclass(frozen=True)
class ExperimentConfig:
    alpha: float
    n_modes: int
    n_grid: int
    t_final: float
    dt_policy: str = "cfl"          # "cfl" or "fixed"
    dt: float = 1e-3                # step for the fixed policy
    cfl_safety: float = 0.4
    dt_min: float = 1e-7
    dt_max: float = 0.05
    delta: float = 0.25
    L: float = 8.0
    beta: float = 5.0
    diag_every: int = 5
    snapshot_every: int = 10
    out_dir: str | None = None
    seed: int = 0
    spectral_filter: bool = False
    preserve_degeneracy: bool = True
    max_growth_per_step: float = 1.10   # ||omega||_inf blow-up heuristic

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must be in [0, 1), got {self.alpha}")
        if self.n_grid < 2 * self.n_modes:
            raise ValueError(f"n_grid={self.n_grid} < 2*N={2 * self.n_modes}")
        if self.dt_policy not in ("cfl", "fixed"):
            raise ValueError(f"unknown dt policy {self.dt_policy!r}")
        if self.dt_policy == "cfl" and not 0.0 < self.cfl_safety <= 0.5:
            raise ValueError(f"cfl safety must be in (0, 0.5], got {self.cfl_safety}")
        if self.dt_policy == "fixed" and self.dt <= 0:
            raise ValueError("fixed policy requires dt > 0")
        if self.t_final < 0:
            raise ValueError("t_final must be >= 0")
        if self.diag_every < 1 or self.snapshot_every < 1:
            raise ValueError("cadences must be >= 1")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SimState:
    omega: SineField
    time: float
    step_count: int
    config: ExperimentConfig


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    hessian_sup: float
    omega_max: float
    l2_norm: float
    degeneracy: float
    dt: float

    CSV_FIELDS = ("time", "hessian_sup", "omega_max", "l2_norm", "degeneracy", "dt")


@dataclass
class RunResult:
    state: SimState
    diagnostics: list
    snapshots: list            # (time, SineField) pairs
    halt_reason: str           # horizon | resolution_exhausted | nan
    gamma: float | None = None
    gamma_r2: float | None = None
    notes: list = field(default_factory=list)
    paths: dict = field(default_factory=dict)


class _Rhs:
    """Tendency evaluator bound to (alpha, N, n_grid).

    With preserve_degeneracy, each tendency is projected onto the subspace
    where the x1-derivative vanishes on the x2-axis (sum_m m a[m,n] = 0 per
    column).  The continuous transport law conserves that degeneracy
    exactly; band truncation of the product breaks it, and since RK4
    preserves linear invariants of the tendency, projecting the tendency
    restores the conservation law to rounding.
    """

    def __init__(self, alpha: float, n_modes: int, n_grid: int,
                 preserve_degeneracy: bool = False):
        self.alpha = alpha
        self.n_modes = n_modes
        self.n_grid = n_grid
        self.preserve_degeneracy = preserve_degeneracy
        m = np.arange(1, n_modes + 1, dtype=np.float64)
        self.mcol = m[:, None]
        self.nrow = m[None, :]
        self.inv_eig = (self.mcol**2 + self.nrow**2) ** (alpha - 1.0)
        self._m = m
        self._msq = float(np.sum(m * m))

    def velocity_grids(self, coeffs: np.ndarray):
        psi = coeffs * self.inv_eig
        u1 = MixedParityField(-psi * self.nrow, ("sin", "cos")).evaluate(self.n_grid).values
        u2 = MixedParityField(psi * self.mcol, ("cos", "sin")).evaluate(self.n_grid).values
        return u1, u2

    def __call__(self, coeffs: np.ndarray):
        u1, u2 = self.velocity_grids(coeffs)
        w1 = MixedParityField(coeffs * self.mcol, ("cos", "sin")).evaluate(self.n_grid).values
        w2 = MixedParityField(coeffs * self.nrow, ("sin", "cos")).evaluate(self.n_grid).values
        adv = u1 * w1 + u2 * w2
        tend = -forward_transform(GridField(adv), self.n_modes).coeffs
        if self.preserve_degeneracy:
            tend = tend - np.outer(self._m, self._m @ tend) / self._msq
        return tend


def nonlinear_term(omega: SineField, alpha: float, n_grid: int,
                   preserve_degeneracy: bool = False) -> SineField:
    """-(u . grad) omega, truncated to the field's mode band."""
    return SineField(_Rhs(alpha, omega.n_modes, n_grid, preserve_degeneracy)(omega.coeffs))


def cfl_dt(u: VelocityField, n_grid: int, safety: float,
           dt_min: float = 1e-7, dt_max: float = 0.05) -> float:
    """dt = safety * (pi / n_grid) / max|u|, clipped to [dt_min, dt_max]."""
    if not 0.0 < safety <= 0.5:
        raise ValueError(f"cfl safety must be in (0, 0.5], got {safety}")
    umax = max(float(np.abs(u.u1.values).max()), float(np.abs(u.u2.values).max()))
    if umax == 0.0:
        return dt_max
    return float(np.clip(safety * (np.pi / n_grid) / umax, dt_min, dt_max))


def step_rk4(state: SimState, dt: float) -> SimState:
    """One classical 4-stage step on the sine coefficients."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    cfg = state.config
    rhs = _Rhs(cfg.alpha, state.omega.n_modes, cfg.n_grid, cfg.preserve_degeneracy)
    c = state.omega.coeffs
    k1 = rhs(c)
    k2 = rhs(c + 0.5 * dt * k1)
    k3 = rhs(c + 0.5 * dt * k2)
    k4 = rhs(c + dt * k3)
    new = c + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if cfg.spectral_filter:
        new = new * _filter_mask(state.omega.n_modes)
    return SimState(SineField(new), state.time + dt, state.step_count + 1, cfg)


def _filter_mask(n_modes: int) -> np.ndarray:
    m = np.arange(1, n_modes + 1) / n_modes
    f = np.exp(-36.0 * m**36)
    return f[:, None] * f[None, :]


def _grid_max(coeffs: np.ndarray, rhs: _Rhs) -> float:
    vals = MixedParityField(coeffs, ("sin", "sin")).evaluate(rhs.n_grid).values
    return float(np.abs(vals).max())


def _parity_spot_check(coeffs: np.ndarray, rhs: _Rhs) -> float:
    """u1 odd in x1 / even in x2; u2 the reverse.  Returns worst defect."""
    psi = coeffs * rhs.inv_eig
    u1 = MixedParityField(-psi * rhs.nrow, ("sin", "cos"))
    u2 = MixedParityField(psi * rhs.mcol, ("cos", "sin"))
    pts = np.array([[0.7, 1.3], [1.9, 0.4]])
    refl1 = pts * np.array([-1.0, 1.0])
    refl2 = pts * np.array([1.0, -1.0])
    d = max(float(np.abs(u1.evaluate_at(refl1) + u1.evaluate_at(pts)).max()),
            float(np.abs(u1.evaluate_at(refl2) - u1.evaluate_at(pts)).max()),
            float(np.abs(u2.evaluate_at(refl1) - u2.evaluate_at(pts)).max()),
            float(np.abs(u2.evaluate_at(refl2) + u2.evaluate_at(pts)).max()))
    return d


def run(config: ExperimentConfig, omega0: SineField | None = None) -> RunResult:
    """Integrate to t_final or a halt condition; emit diagnostics/snapshots.

    Partial output remains valid on halt.  Exit state is reported via
    halt_reason; growth-rate fitting uses the recorded hessian series.
    """
    if omega0 is None:
        omega0 = build_omega0(InitialDataSpec(
            delta=config.delta, n_modes=config.n_modes, n_grid=config.n_grid))
    if omega0.n_modes != config.n_modes:
        raise ValueError("omega0 truncation order disagrees with config")
    rhs = _Rhs(config.alpha, config.n_modes, config.n_grid, config.preserve_degeneracy)
    out = Path(config.out_dir) if config.out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)

    state = SimState(omega0, 0.0, 0, config)
    diagnostics = []
    snapshots = []
    notes = []
    halt = "horizon"
    omax_prev = None
    steps_since_diag = 0
    t_wall = _time.time()

    def record(dt_now: float):
        nonlocal omax_prev, steps_since_diag
        c = state.omega.coeffs
        omax = _grid_max(c, rhs)
        rec = DiagnosticsRecord(
            time=state.time,
            hessian_sup=hessian_sup_norm(state.omega, config.n_grid),
            omega_max=omax,
            l2_norm=l2_norm(state.omega),
            degeneracy=check_degeneracy(state.omega),
            dt=dt_now)
        diagnostics.append(rec)
        parity = _parity_spot_check(c, rhs)
        if parity > 1e-10:
            notes.append(f"parity defect {parity:.2e} at t={state.time:.4f}")
        grew = None
        if omax_prev is not None and steps_since_diag > 0 and omax_prev > 0:
            grew = (omax / omax_prev) ** (1.0 / steps_since_diag)
        omax_prev = omax
        steps_since_diag = 0
        return rec, grew

    def snap():
        snapshots.append((state.time, state.omega))
        if out:
            write_snapshot(out / f"snap_{state.step_count:07d}.msqg",
                           state.omega, config.n_grid, config.alpha, state.time)

    record(0.0)
    snap()

    while state.time < config.t_final - 1e-14:
        if config.dt_policy == "cfl":
            u1, u2 = rhs.velocity_grids(state.omega.coeffs)
            umax = max(float(np.abs(u1).max()), float(np.abs(u2).max()))
            dt = config.dt_max if umax == 0.0 else float(
                np.clip(config.cfl_safety * (np.pi / config.n_grid) / umax,
                        config.dt_min, config.dt_max))
        else:
            dt = config.dt
        dt = min(dt, config.t_final - state.time)

        try:
            state = step_rk4(state, dt)
        except ValueError as exc:   # non-finite coefficients
            notes.append(f"halted at t={state.time:.6f}: {exc}")
            halt = "nan"
            if out:
                write_snapshot(out / "state_dump.msqg", state.omega,
                               config.n_grid, config.alpha, state.time)
            break
        steps_since_diag += 1

        if state.step_count % config.diag_every == 0 or state.time >= config.t_final - 1e-14:
            _, grew = record(dt)
            if grew is not None and grew > config.max_growth_per_step:
                notes.append(
                    f"max-norm growth {grew:.3f}/step at t={state.time:.6f} "
                    "exceeds the transport max principle tolerance")
                halt = "resolution_exhausted"
        if state.step_count % config.snapshot_every == 0:
            snap()
        if halt != "horizon":
            break

    if not snapshots or snapshots[-1][0] != state.time:
        snap()
    if diagnostics[-1].time != state.time:
        record(0.0)

    gamma = gamma_r2 = None
    times = np.array([d.time for d in diagnostics])
    hess = np.array([d.hessian_sup for d in diagnostics])
    if len(times) >= 10 and hess.min() > 0:
        try:
            g = fit_gamma(times, hess)
            gamma, gamma_r2 = g.fitted_gamma, g.fit_r2
        except ValueError as exc:
            notes.append(f"growth fit skipped: {exc}")

    result = RunResult(state, diagnostics, snapshots, halt, gamma, gamma_r2, notes)
    if out:
        result.paths = _write_outputs(out, config, result, _time.time() - t_wall)
    return result


def _write_outputs(out: Path, config: ExperimentConfig, result: RunResult,
                   wall: float) -> dict:
    diag_path = out / "diagnostics.csv"
    with open(diag_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DiagnosticsRecord.CSV_FIELDS)
        for rec in result.diagnostics:
            w.writerow([f"{getattr(rec, f):.17g}" for f in DiagnosticsRecord.CSV_FIELDS])
    meta_path = out / "metadata.json"
    meta = {
        "config": config.as_dict(),
        "provenance": f"msqglab-{__version__}",
        "wall_seconds": wall,
        "halt_reason": result.halt_reason,
        "gamma": result.gamma,
        "gamma_r2": result.gamma_r2,
        "spectral_filter": config.spectral_filter,
        "preserve_degeneracy": config.preserve_degeneracy,
        "notes": result.notes,
    }
    meta_path.write_text(json.dumps(meta, indent=2) + "\n")
    return {"diagnostics": str(diag_path), "metadata": str(meta_path)}
