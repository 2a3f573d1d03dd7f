"""Command-line orchestration: make-data, simulate, verify, trace.

Configuration comes from defaults, overridden by an INI-style config file
(flat key = value under a [run] section), overridden by command-line
flags.  Every run writes a manifest.json listing all emitted files with
sha256 hashes (written last).  Exit codes: 0 ok, 1 assertion/halt
failure, 2 usage or validation error.  MSQGLAB_THREADS bounds FFT worker
threads.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .evolution import ExperimentConfig, run
from .initial_data import (InitialDataSpec, build_omega0, check_degeneracy,
                           gradient_sup_norm, plateau_deficit_fraction)
from .kernels import KernelParams
from .snapshots import read_snapshot, write_snapshot
from .spectral import inverse_transform
from .trajectories import (VelocitySampler, fit_gamma, medium_ratio_monitor,
                           select_start, stopping_time, trace)
from .verify import (verify_background, verify_decomposition, verify_far_field,
                     verify_kernel_asymptotics, verify_medium_ratio,
                     verify_near_field, write_report_json, write_reports_csv)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

DEFAULTS = {
    "alpha": 0.5,
    "delta": 0.25,
    "L": 8.0,
    "beta": 5.0,
    "N": 256,
    "Ng": 512,
    "dt": 0.0,          # 0 -> CFL policy
    "T": 10.0,
    "seed": 0,
    "which": "all",
    "out": "msqglab_out",
    "blend_order": 4,
    "image_radius": 8,
    "safety": 0.4,
    "diag_every": 5,
    "snapshot_every": 10,
    "growth_threshold_factor": 1e3,
}

_FLOAT_KEYS = {"alpha", "delta", "L", "beta", "dt", "T", "safety",
               "growth_threshold_factor"}
_INT_KEYS = {"N", "Ng", "seed", "blend_order", "image_radius", "diag_every",
             "snapshot_every"}


class UsageError(Exception):
    pass


def _load_config_file(path: str) -> dict:
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise UsageError(f"config file {path!r} not found")
    merged = {}
    for section in list(cp.sections()) + ["DEFAULT"]:
        for key, val in cp.items(section):
            merged.setdefault(key, val)
    out = {}
    for key, val in merged.items():
        if key in _FLOAT_KEYS:
            out[key] = float(val)
        elif key in _INT_KEYS:
            out[key] = int(val)
        else:
            out[key] = val
    return out


def _settings(args) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(_load_config_file(args.config))
    for key in DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    return cfg


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out: Path, subcommand: str, cfg: dict, t0: float) -> None:
    files = sorted(p for p in out.rglob("*")
                   if p.is_file() and p.name != "manifest.json")
    manifest = {
        "subcommand": subcommand,
        "version": __version__,
        "config": cfg,
        "wall_seconds": time.time() - t0,
        "files": [{"path": str(p.relative_to(out)), "sha256": _sha256(p),
                   "bytes": p.stat().st_size} for p in files],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _kernel_params(cfg: dict, alpha: float) -> KernelParams:
    return KernelParams(alpha=alpha, image_radius=int(cfg["image_radius"]))


def cmd_make_data(args) -> int:
    cfg = _settings(args)
    t0 = time.time()
    spec = InitialDataSpec(delta=cfg["delta"], n_modes=cfg["N"], n_grid=cfg["Ng"],
                           blend_order=cfg["blend_order"],
                           delta_max=max(np.pi / 8, min(cfg["delta"] * 1.0001, np.pi / 4 * 0.999)))
    omega = build_omega0(spec)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_snapshot(out / "omega0.msqg", omega, cfg["Ng"], cfg["alpha"], 0.0)

    vals = inverse_transform(omega, cfg["Ng"]).values
    deg = check_degeneracy(omega)
    grad = gradient_sup_norm(omega, cfg["Ng"])
    deficit = plateau_deficit_fraction(omega, cfg["Ng"])
    strip_bound = 4 * np.pi * cfg["delta"] / np.pi**2
    checks = {
        "grid_min": float(vals.min()),
        "grid_max": float(vals.max()),
        "plateau_deficit_fraction": deficit,
        "strip_bound": strip_bound,
        "degeneracy": deg,
        "degeneracy_rel": deg / grad,
    }
    # range check allows the series-truncation ripple of the C^k blend
    ok = (vals.min() > -1e-3 and vals.max() < 1 + 1e-3
          and deficit <= strip_bound + 0.02 and deg <= 1e-8 * grad)
    (out / "make_data_checks.json").write_text(json.dumps(checks, indent=2) + "\n")
    for key, val in checks.items():
        print(f"{key}: {val:.6g}")
    print(f"checks {'pass' if ok else 'FAIL'}")
    _write_manifest(out, "make-data", cfg, t0)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_simulate(args) -> int:
    cfg = _settings(args)
    t0 = time.time()
    out = Path(cfg["out"])
    dt_policy = "fixed" if cfg["dt"] > 0 else "cfl"
    config = ExperimentConfig(
        alpha=cfg["alpha"], n_modes=cfg["N"], n_grid=cfg["Ng"], t_final=cfg["T"],
        dt_policy=dt_policy, dt=cfg["dt"] or 1e-3, cfl_safety=cfg["safety"],
        delta=cfg["delta"], L=cfg["L"], beta=cfg["beta"],
        diag_every=cfg["diag_every"], snapshot_every=cfg["snapshot_every"],
        out_dir=str(out), seed=cfg["seed"])
    omega0 = None
    if getattr(args, "initial", None):
        omega0, header = read_snapshot(args.initial)
        print(f"initial field from {args.initial} (t={header['time']})")
    result = run(config, omega0)
    summary = {
        "halt_reason": result.halt_reason,
        "final_time": result.state.time,
        "steps": result.state.step_count,
        "gamma": result.gamma,
        "gamma_r2": result.gamma_r2,
        "hessian_growth": result.diagnostics[-1].hessian_sup / result.diagnostics[0].hessian_sup,
        "notes": result.notes,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    _write_manifest(out, "simulate", cfg, t0)
    return EXIT_OK if result.halt_reason == "horizon" else EXIT_FAIL


def _verify_fields(cfg: dict):
    spec = InitialDataSpec(delta=cfg["delta"], n_modes=cfg["N"], n_grid=cfg["Ng"],
                           blend_order=cfg["blend_order"])
    return build_omega0(spec)


def cmd_verify(args) -> int:
    cfg = _settings(args)
    t0 = time.time()
    which = cfg["which"]
    choices = ("kernels", "near", "medium", "far", "background", "decomposition", "all")
    if which not in choices:
        raise UsageError(f"--which must be one of {choices}, got {which!r}")
    alpha = cfg["alpha"]
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    params = _kernel_params(cfg, alpha)
    reports = []

    need = lambda name: which in (name, "all")
    omega = None
    if any(need(n) for n in ("near", "medium", "far", "decomposition")):
        omega = _verify_fields(cfg)

    if need("kernels"):
        reports.append(verify_kernel_asymptotics(alpha))
    if need("near"):
        reports.append(verify_near_field(
            omega, alpha, np.geomspace(0.002, 0.05, 6), cfg["L"], params))
    if need("medium"):
        reports.append(verify_medium_ratio(omega, alpha, (8.0, 16.0, 32.0, 64.0), params))
    if need("far"):
        reports.append(verify_far_field(omega, alpha, np.geomspace(0.001, 0.01, 5), params))
    if need("background"):
        fields = {}
        for delta in (0.1, 0.2, 0.4):
            sp = InitialDataSpec(delta=delta, n_modes=cfg["N"], n_grid=cfg["Ng"],
                                 blend_order=cfg["blend_order"], delta_max=0.6)
            fields[delta] = build_omega0(sp)
        reports.append(verify_background(fields, alpha, cfg["L"], params))
    if need("decomposition"):
        pts = [(0.05, 0.08), (0.02, 0.01), (0.004, 0.009)]
        reports.append(verify_decomposition(omega, alpha, pts, cfg["L"], params))

    for rep in reports:
        write_report_json(rep, out / f"report_{rep.estimate_id}.json")
        status = "pass" if rep.passed else "FAIL"
        extra = ""
        if rep.fitted_exponent is not None and rep.theoretical_exponent is not None:
            extra = (f" exponent {rep.fitted_exponent:+.3f}"
                     f" (target {rep.theoretical_exponent:+.3f})")
        print(f"{rep.estimate_id}: {status}{extra} constant={rep.fitted_constant:.4g}")
    write_reports_csv(reports, out / "verify_summary.csv")
    _write_manifest(out, "verify", cfg, t0)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def _load_run_dir(run_dir: Path):
    snaps = []
    for p in sorted(run_dir.glob("snap_*.msqg")):
        field, header = read_snapshot(p)
        snaps.append((float(header["time"]), field))
    if not snaps:
        raise UsageError(f"no snapshots found in {run_dir}")
    diag_path = run_dir / "diagnostics.csv"
    times, hess = [], []
    if diag_path.exists():
        import csv as _csv

        with open(diag_path) as fh:
            for row in _csv.DictReader(fh):
                times.append(float(row["time"]))
                hess.append(float(row["hessian_sup"]))
    meta = {}
    if (run_dir / "metadata.json").exists():
        meta = json.loads((run_dir / "metadata.json").read_text())
    return snaps, np.array(times), np.array(hess), meta


def cmd_trace(args) -> int:
    cfg = _settings(args)
    t0 = time.time()
    run_dir = Path(args.run_dir)
    snaps, times, hess, meta = _load_run_dir(run_dir)
    alpha = meta.get("config", {}).get("alpha", cfg["alpha"])
    n_grid = meta.get("config", {}).get("n_grid", cfg["Ng"])
    t_end = snaps[-1][0]
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)

    grid_floor = 4 * np.pi / n_grid
    start = select_start(t_end, cfg["delta"], alpha, cfg["beta"], grid_floor)
    if args.x1 is not None and args.x2 is not None:
        start_pt = (args.x1, args.x2)
        scaled = False
        note = "explicit start point"
    else:
        start_pt, scaled, note = start.point, start.scaled_regime, start.note

    sampler = VelocitySampler(snaps, alpha)
    dt = cfg["dt"] if cfg["dt"] > 0 else max(t_end / 2000.0, 1e-4)
    traj = trace(start_pt, sampler, t_end, dt)
    if args.monitor_L > 0:
        traj = medium_ratio_monitor(traj, snaps, alpha, args.monitor_L,
                                    _kernel_params(cfg, alpha))

    t_stop, reason = (t_end, "horizon")
    gamma = r2 = None
    if len(hess):
        threshold = cfg["growth_threshold_factor"] * hess[0]
        t_stop, reason = stopping_time(traj, times, hess, t_end, start_pt[0], threshold)
        if len(hess) >= 10:
            g = fit_gamma(times, hess)
            gamma, r2 = g.fitted_gamma, g.fit_r2
            with open(out / "growth.csv", "w", newline="") as fh:
                fh.write("time,hessian_sup\n")
                for t, h in zip(times, hess):
                    fh.write(f"{t:.17g},{h:.17g}\n")

    with open(out / "trajectory.csv", "w", newline="") as fh:
        fh.write("time,x1,x2,u1,u2,r\n")
        for i in range(len(traj.times)):
            r = traj.ratios[i]
            fh.write(f"{traj.times[i]:.17g},{traj.positions[i,0]:.17g},"
                     f"{traj.positions[i,1]:.17g},{traj.velocities[i,0]:.17g},"
                     f"{traj.velocities[i,1]:.17g},{'' if np.isnan(r) else f'{r:.17g}'}\n")

    summary = {
        "start": list(start_pt),
        "scaled_regime": scaled,
        "note": note,
        "T0": t_stop,
        "reason": reason,
        "gamma": gamma,
        "gamma_r2": r2,
        "halted": traj.halted,
        "halt_note": traj.halt_note,
    }
    (out / "trace_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    _write_manifest(out, "trace", cfg, t0)
    return EXIT_OK if not traj.halted else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msqglab",
        description="Modified-SQG simulator and kernel-verification lab "
                    "(set MSQGLAB_THREADS to bound FFT workers)")
    parser.add_argument("--version", action="version", version=f"msqglab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI config file ([run] section, key = value)")
        p.add_argument("--alpha", type=float)
        p.add_argument("--delta", type=float)
        p.add_argument("--L", type=float)
        p.add_argument("--beta", type=float)
        p.add_argument("--N", type=int, help="sine truncation order")
        p.add_argument("--Ng", type=int, help="collocation grid size (>= 2N)")
        p.add_argument("--dt", type=float, help="fixed step; omit/0 for CFL policy")
        p.add_argument("--T", type=float, help="time horizon")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("make-data", help="build and check the initial vorticity")
    common(p)
    p.set_defaults(func=cmd_make_data)

    p = sub.add_parser("simulate", help="integrate the transport equation")
    common(p)
    p.add_argument("--initial", help="snapshot file to start from")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run estimate verifier sweeps")
    common(p)
    p.add_argument("--which",
                   choices=["kernels", "near", "medium", "far", "background",
                            "decomposition", "all"])
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("trace", help="trace characteristics through stored snapshots")
    common(p)
    p.add_argument("--run-dir", required=True, help="simulate output directory")
    p.add_argument("--x1", type=float, help="explicit start x1")
    p.add_argument("--x2", type=float, help="explicit start x2")
    p.add_argument("--monitor-L", type=float, default=0.0,
                   help="medium-ratio monitor scale (0 disables)")
    p.set_defaults(func=cmd_trace)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
