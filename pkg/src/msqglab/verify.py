"""Numerical verification of the velocity-decomposition estimates.

Each verifier sweeps quadrature measurements against an analytic bound and
produces a BoundReport with the sampled rows, the empirical constant, a
log-log exponent fit, and a pass flag.  The pass flag tests the configured
expectation exactly as stated; measured exponents are always recorded, so a
failed expectation still documents what the data actually does.

Conventions: sample sets default to evenly spaced directions times
geometric magnitude ladders (8 directions x 6 magnitudes), deterministic
for a fixed configuration.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .initial_data import gradient_sup_norm
from .kernels import (KernelParams, QuadratureOracle, RegionSpec,
                      relative_kernel_error)
from .spectral import SineField, grid_max_abs, hessian_sup_norm

__all__ = [
    "BoundReport",
    "loglog_fit",
    "default_directions",
    "verify_kernel_asymptotics",
    "verify_near_field",
    "verify_medium_ratio",
    "verify_far_field",
    "verify_background",
    "verify_decomposition",
    "write_report_json",
    "write_reports_csv",
]


@dataclass
class BoundReport:
    estimate_id: str
    alpha: float
    fitted_constant: float
    fitted_exponent: float | None = None
    theoretical_exponent: float | None = None
    exponent_tol: float | None = None
    regression_r2: float | None = None
    passed: bool = False
    samples: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "estimate_id": self.estimate_id,
            "alpha": self.alpha,
            "fitted_constant": self.fitted_constant,
            "fitted_exponent": self.fitted_exponent,
            "theoretical_exponent": self.theoretical_exponent,
            "exponent_tol": self.exponent_tol,
            "regression_r2": self.regression_r2,
            "passed": bool(self.passed),
            "samples": self.samples,
            "notes": self.notes,
        }


def loglog_fit(xs, ys):
    """Least-squares slope/intercept/R^2 of log(ys) against log(xs)."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if len(xs) < 2 or np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("log-log fit needs >= 2 strictly positive samples")
    lx, ly = np.log(xs), np.log(ys)
    a = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(a, ly, rcond=None)
    pred = a @ coef
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(coef[0]), float(coef[1]), r2


def default_directions(n: int = 8, margin: float = 0.15):
    """Unit directions in the open first quadrant, evenly spaced in angle."""
    ang = np.linspace(margin, np.pi / 2 - margin, n)
    return np.column_stack([np.cos(ang), np.sin(ang)])


def verify_kernel_asymptotics(alpha: float, ratios=(10.0, 100.0, 1000.0),
                              n_directions: int = 48,
                              variation_limit: float = 2.0) -> BoundReport:
    """Boundedness of |f_j| * (|y|/|x|) across scale ratios.

    f_j is exactly even in x -> -x (both K_j and their leading forms are
    odd), so the true decay is |f_j| ~ C/ratio^2 and the scaled quantity
    max_dirs |f_j| * ratio falls ~1/ratio instead of holding constant.  The
    configured check (variation across ratios <= variation_limit) encodes
    the constant-level expectation and is evaluated as stated.
    """
    nx = max(4, int(round(np.sqrt(n_directions / 3))))
    ny = max(3, int(np.ceil(n_directions / nx)))
    xdirs = default_directions(nx, margin=0.15)
    ydirs = default_directions(ny, margin=0.15)
    rows = []
    maxima = []
    for ratio in ratios:
        worst = 0.0
        for xd in xdirs:
            x = 1e-3 * xd
            for yd in ydirs:
                y = 1e-3 * ratio * yd
                for j in (1, 2):
                    f = float(relative_kernel_error(j, x, np.asarray(y), alpha))
                    worst = max(worst, abs(f) * ratio)
        maxima.append(worst)
        rows.append({"ratio": ratio, "max_f_times_ratio": worst})
    variation = max(maxima) / min(maxima)
    slope, _, r2 = loglog_fit(ratios, maxima)
    passed = variation <= variation_limit
    return BoundReport(
        estimate_id="kernel_asymptotics", alpha=alpha,
        fitted_constant=max(maxima), fitted_exponent=slope,
        theoretical_exponent=0.0, exponent_tol=None, regression_r2=r2,
        passed=passed, samples=rows,
        notes=[f"max/min variation across ratios = {variation:.3g} "
               f"(limit {variation_limit}); scaled maxima decay with slope "
               f"{slope:.3f} because the corrections are quadratic in |x|/|y|"])


def _direction_magnitude_samples(directions, magnitudes):
    return [(float(r * d[0]), float(r * d[1])) for r in magnitudes for d in directions]


def verify_near_field(omega: SineField, alpha: float, magnitudes, L: float,
                      params: KernelParams | None = None, n_directions: int = 8,
                      exponent_tol: float = 0.15, n_grid: int | None = None) -> BoundReport:
    """Near-square contribution against x_j |x|^(2-2a) L^(2-2a) ||Hess||_inf.

    Fits the |x| exponent of |u_j^near|/x_j pooled over directions and both
    components; the empirical constant is the worst measured/bound ratio.
    """
    params = params or KernelParams(alpha=alpha)
    if n_grid is None:
        n_grid = 2 * omega.n_modes
    hess = hessian_sup_norm(omega, n_grid)
    oracle = QuadratureOracle(omega, params)
    dirs = default_directions(n_directions)
    rows = []
    notes = []
    mags_used, pooled = [], []
    for r in np.asarray(magnitudes, dtype=np.float64):
        if L * r >= np.pi:
            notes.append(f"|x|={r:.4g} skipped: near square exceeds the cell")
            continue
        per_mag = []
        for d in dirs:
            x = (float(r * d[0]), float(r * d[1]))
            if min(x) == 0.0:
                notes.append(f"sample {x} excluded: x_j = 0 degenerates the bound")
                continue
            u1, u2 = oracle.velocity(x, RegionSpec("near", L))
            for j, uj in ((1, u1), (2, u2)):
                xj = x[j - 1]
                bound = xj * r ** (2 - 2 * alpha) * L ** (2 - 2 * alpha) * hess
                measured = abs(uj)
                rows.append({"x": list(x), "L": L, "j": j, "measured": measured,
                             "bound": bound, "ratio": measured / bound})
                per_mag.append(measured / xj)
        if per_mag:
            mags_used.append(r)
            pooled.append(float(np.mean(per_mag)))
    theo = 2 - 2 * alpha
    if max(pooled, default=0.0) == 0.0:
        return BoundReport(
            estimate_id="near_field", alpha=alpha, fitted_constant=0.0,
            theoretical_exponent=theo, exponent_tol=exponent_tol, passed=True,
            samples=rows, notes=notes + ["all measured values zero; trivially within the bound"])
    slope, _, r2 = loglog_fit(mags_used, pooled)
    fitted_c = max(row["ratio"] for row in rows)
    passed = (abs(slope - theo) <= exponent_tol) and r2 >= 0.95
    if r2 < 0.95:
        notes.append(f"regression R^2 = {r2:.3f} < 0.95")
    return BoundReport(
        estimate_id="near_field", alpha=alpha, fitted_constant=fitted_c,
        fitted_exponent=slope, theoretical_exponent=theo,
        exponent_tol=exponent_tol, regression_r2=r2, passed=passed,
        samples=rows, notes=notes)


def verify_medium_ratio(omega: SineField, alpha: float, L_values,
                        params: KernelParams | None = None,
                        n_directions: int = 5, cutoff_fractions=(0.9, 0.45),
                        exponent_tol: float = 0.2) -> BoundReport:
    """Component-ratio agreement r = -u1 x2 / (x1 u2) on the medium region.

    For each L the deviation |r - 1| is maximized over sample points with
    L|x| <= 1 (the bound's extremal regime is L|x| near 1); the envelope is
    fitted against L.  The empirical B is max |r - 1| * L.
    """
    params = params or KernelParams(alpha=alpha)
    oracle = QuadratureOracle(omega, params)
    dirs = default_directions(n_directions, margin=0.2)
    rows = []
    notes = []
    env = []
    L_used = []
    for L in np.asarray(L_values, dtype=np.float64):
        worst = 0.0
        for frac in cutoff_fractions:
            r_mag = frac / L
            for d in dirs:
                x = (float(r_mag * d[0]), float(r_mag * d[1]))
                u1, u2 = oracle.velocity(x, RegionSpec("medium", L))
                if u2 == 0.0:
                    notes.append(f"sample {x} rejected: u2_med = 0 (setup bug?)")
                    continue
                ratio = -u1 * x[1] / (x[0] * u2)
                dev = abs(ratio - 1.0)
                rows.append({"x": list(x), "L": float(L), "measured": dev,
                             "bound": None, "ratio": ratio})
                worst = max(worst, dev)
        if worst > 0:
            env.append(worst)
            L_used.append(float(L))
    slope, _, r2 = loglog_fit(L_used, env)
    b_emp = max(e * L for e, L in zip(env, L_used))
    for row in rows:
        row["bound"] = b_emp / row["L"]
    passed = abs(slope - (-1.0)) <= exponent_tol
    notes.append(f"envelope max|r-1| per L: "
                 + ", ".join(f"L={L:g}: {e:.3e}" for L, e in zip(L_used, env)))
    return BoundReport(
        estimate_id="medium_ratio", alpha=alpha, fitted_constant=b_emp,
        fitted_exponent=slope, theoretical_exponent=-1.0,
        exponent_tol=exponent_tol, regression_r2=r2, passed=passed,
        samples=rows, notes=notes)


def verify_far_field(omega: SineField, alpha: float, magnitudes,
                     params: KernelParams | None = None,
                     other_coord: float = 0.02, slope_tol: float = 0.1,
                     tail_constant: float = 3.0,
                     n_grid: int | None = None) -> BoundReport:
    """Image-cell contribution: |u_j^far| <= C(a) x_j ||omega||_inf.

    Checks linearity in x_j (slope of log|u_j| vs log x_j with the other
    coordinate fixed) and that doubling the image radius moves the result
    by at most tail_constant * R^(-2a) * ||omega||_inf * x_j.
    """
    params = params or KernelParams(alpha=alpha)
    if n_grid is None:
        n_grid = 2 * omega.n_modes
    omega_sup = grid_max_abs(omega, n_grid)
    oracle = QuadratureOracle(omega, params)
    big = KernelParams(alpha=alpha, pv_radius_cells=params.pv_radius_cells,
                       image_radius=2 * params.image_radius, pv_mode=params.pv_mode,
                       tail_extrapolate=False, cells_central=params.cells_central,
                       cells_panel=params.cells_panel, cells_far=params.cells_far)
    oracle_big = QuadratureOracle(omega, big)
    rows = []
    notes = []
    slopes = []
    tail_ok = True
    for j in (1, 2):
        mags_used, meas = [], []
        for r in np.asarray(magnitudes, dtype=np.float64):
            x = (float(r), other_coord) if j == 1 else (other_coord, float(r))
            u = oracle.velocity(x, RegionSpec("far"))
            u_big = oracle_big.velocity(x, RegionSpec("far"))
            uj, uj_big = u[j - 1], u_big[j - 1]
            xj = x[j - 1]
            bound = xj * omega_sup
            rows.append({"x": list(x), "j": j, "measured": abs(uj), "bound": bound,
                         "ratio": abs(uj) / bound})
            tail_allow = tail_constant * params.image_radius ** (-2 * alpha) * omega_sup * xj
            if abs(uj_big - uj) > tail_allow:
                tail_ok = False
                notes.append(f"tail check failed at x={x}, j={j}: "
                             f"|delta|={abs(uj_big - uj):.3e} > {tail_allow:.3e}")
            mags_used.append(r)
            meas.append(abs(uj))
        slope, _, r2 = loglog_fit(mags_used, meas)
        slopes.append(slope)
        notes.append(f"u{j}: slope in x_{j} = {slope:.4f} (R^2 = {r2:.5f})")
    fitted_c = max(row["ratio"] for row in rows)
    worst_slope = max(slopes, key=lambda s: abs(s - 1.0))
    passed = all(abs(s - 1.0) <= slope_tol for s in slopes) and tail_ok
    return BoundReport(
        estimate_id="far_field", alpha=alpha, fitted_constant=fitted_c,
        fitted_exponent=worst_slope, theoretical_exponent=1.0,
        exponent_tol=slope_tol, regression_r2=None, passed=passed,
        samples=rows, notes=notes)


def verify_background(fields_by_delta, alpha: float, L: float = 8.0,
                      params: KernelParams | None = None,
                      exponent_tol: float = 0.15) -> BoundReport:
    """Medium-field lower bound (-1)^j u_j^med >= c x_j delta^(-alpha).

    fields_by_delta maps delta -> plateau SineField built at that delta.
    Samples x = delta/(2L) * (1, 1) per delta (plus sign checks at smaller
    magnitudes); rejects samples violating L|x| <= delta.
    """
    params_alpha = params.alpha if params else alpha
    if params and abs(params_alpha - alpha) > 1e-12:
        raise ValueError("params.alpha disagrees with alpha")
    rows = []
    notes = []
    deltas, scaled = [], []
    sign_ok = True
    for delta in sorted(fields_by_delta):
        omega = fields_by_delta[delta]
        p = params or KernelParams(alpha=alpha)
        oracle = QuadratureOracle(omega, p)
        measured_here = []
        for frac in (1.0, 0.5):
            x = (frac * delta / (2 * L), frac * delta / (2 * L))
            if L * float(np.hypot(*x)) > delta:
                notes.append(f"x={x} rejected: L|x| > delta={delta}")
                continue
            u1, u2 = oracle.velocity(x, RegionSpec("medium", L))
            m1, m2 = -u1 / x[0], u2 / x[1]
            if m1 <= 0 or m2 <= 0:
                sign_ok = False
                notes.append(f"sign violation at delta={delta}, x={x}: ({m1:.3e}, {m2:.3e})")
            bound = delta ** (-alpha)
            for j, m in ((1, m1), (2, m2)):
                rows.append({"delta": delta, "x": list(x), "j": j,
                             "measured": m, "bound": bound, "ratio": m / bound})
            if frac == 1.0:
                measured_here.append(min(m1, m2))
        if measured_here:
            deltas.append(delta)
            scaled.append(min(measured_here))
    slope, _, r2 = loglog_fit(deltas, scaled)
    c_emp = min(row["ratio"] for row in rows)
    passed = sign_ok and abs(slope - (-alpha)) <= exponent_tol
    notes.append(f"fitted delta exponent {slope:.3f} vs -alpha = {-alpha}")
    return BoundReport(
        estimate_id="background", alpha=alpha, fitted_constant=c_emp,
        fitted_exponent=slope, theoretical_exponent=-alpha,
        exponent_tol=exponent_tol, regression_r2=r2, passed=passed,
        samples=rows, notes=notes)


def verify_decomposition(omega: SineField, alpha: float, x_samples, L: float,
                         params: KernelParams | None = None,
                         rel_tol: float = 5e-3) -> BoundReport:
    """near + medium + far must reproduce the full-region quadrature."""
    params = params or KernelParams(alpha=alpha)
    oracle = QuadratureOracle(omega, params)
    rows = []
    worst = 0.0
    for x in x_samples:
        parts = np.zeros(2)
        for kind in ("near", "medium", "far"):
            parts += np.asarray(oracle.velocity(x, RegionSpec(kind, L)))
        full = np.asarray(oracle.velocity(x, RegionSpec("full", L)))
        rel = float(np.linalg.norm(parts - full) / max(np.linalg.norm(full), 1e-300))
        worst = max(worst, rel)
        rows.append({"x": list(map(float, x)), "L": L, "measured": rel,
                     "bound": rel_tol, "ratio": rel / rel_tol})
    return BoundReport(
        estimate_id="decomposition", alpha=alpha, fitted_constant=worst,
        passed=worst <= rel_tol, samples=rows,
        notes=[f"worst relative defect {worst:.3e} (tol {rel_tol})"])


def write_report_json(report: BoundReport, path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2) + "\n")


def write_reports_csv(reports, path) -> None:
    """Summary table: one row per sample across all reports."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["estimate_id", "alpha", "L_or_delta", "x", "measured", "bound", "ratio"])
        for rep in reports:
            for row in rep.samples:
                scale = row.get("L", row.get("delta", row.get("ratio", "")))
                x = row.get("x", "")
                w.writerow([rep.estimate_id, f"{rep.alpha:.17g}", scale,
                            json.dumps(x) if x != "" else "",
                            _fmt(row.get("measured")), _fmt(row.get("bound")),
                            _fmt(row.get("ratio"))])


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.17g}"
    return v
