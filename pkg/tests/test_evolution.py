"""Time stepping: tendency correctness, conservation, halts, cadences."""

import numpy as np
import pytest

from msqglab.evolution import (DiagnosticsRecord, ExperimentConfig, RunResult,
                               SimState, cfl_dt, nonlinear_term, run, step_rk4)
from msqglab.initial_data import InitialDataSpec, build_omega0, check_degeneracy
from msqglab.spectral import (SineField, VelocityField, GridField,
                              velocity_from_vorticity)


def make_config(**kw):
    base = dict(alpha=0.5, n_modes=16, n_grid=32, t_final=1.0)
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfigValidation:
    def test_alpha_range(self):
        with pytest.raises(ValueError, match="alpha"):
            make_config(alpha=1.0)
        make_config(alpha=0.0)   # Euler limit allowed

    def test_grid_margin(self):
        with pytest.raises(ValueError, match="n_grid"):
            make_config(n_grid=30)

    def test_cfl_safety(self):
        with pytest.raises(ValueError, match="safety"):
            make_config(cfl_safety=0.7)

    def test_fixed_needs_dt(self):
        with pytest.raises(ValueError, match="dt"):
            make_config(dt_policy="fixed", dt=0.0)


class TestNonlinearTerm:
    def test_zero_field(self):
        t = nonlinear_term(SineField.zeros(8), 0.5, 16)
        assert np.abs(t.coeffs).max() == 0.0

    def test_single_mode_stationary(self):
        # psi is proportional to omega, so u . grad omega vanishes pointwise
        om = SineField.from_modes({(1, 1): 1.0}, 8)
        t = nonlinear_term(om, 0.5, 16)
        assert np.abs(t.coeffs).max() < 1e-15

    def test_two_mode_against_symbolic_jacobian(self):
        # independent oracle: expand -(u . grad) omega with sympy and
        # project onto the sine basis by symbolic integration
        import sympy as sp

        alpha = 0.5
        x, y = sp.symbols("x y", real=True)
        a1 = sp.Rational(2) ** sp.Rational(-1, 2)   # (m^2+n^2)^(alpha-1), (1,1)
        a2 = sp.Integer(5) ** sp.Rational(-1, 2)    # (2,1) mode
        omega = sp.sin(x) * sp.sin(y) + sp.sin(2 * x) * sp.sin(y)
        psi = a1 * sp.sin(x) * sp.sin(y) + a2 * sp.sin(2 * x) * sp.sin(y)
        u1 = -sp.diff(psi, y)
        u2 = sp.diff(psi, x)
        tend = sp.expand_trig(sp.expand(
            -(u1 * sp.diff(omega, x) + u2 * sp.diff(omega, y))))

        n = 6
        expect = np.zeros((n, n))
        for m in range(1, n + 1):
            for k in range(1, n + 1):
                c = sp.integrate(sp.integrate(
                    tend * sp.sin(m * x) * sp.sin(k * y), (x, 0, sp.pi)), (y, 0, sp.pi))
                expect[m - 1, k - 1] = float(c * 4 / sp.pi**2)

        om = SineField.from_modes({(1, 1): 1.0, (2, 1): 1.0}, n)
        got = nonlinear_term(om, alpha, 16)
        np.testing.assert_allclose(got.coeffs, expect, atol=1e-12)


class TestStepRK4:
    def test_stationary_fixed_point(self):
        om = SineField.from_modes({(1, 1): 1.0}, 8)
        st = SimState(om, 0.0, 0, make_config(n_modes=8, n_grid=16))
        for _ in range(100):
            st = step_rk4(st, 0.01)
        assert np.abs(st.omega.coeffs - om.coeffs).max() < 1e-12
        assert st.time == pytest.approx(1.0)
        assert st.step_count == 100

    def test_fourth_order_convergence(self):
        om = SineField.from_modes({(1, 1): 1.0, (2, 1): 0.5, (1, 3): 0.2}, 12)
        cfg = make_config(n_modes=12, n_grid=24)
        base = SimState(om, 0.0, 0, cfg)

        def advance(dt, n):
            st = base
            for _ in range(n):
                st = step_rk4(st, dt)
            return st.omega.coeffs

        h = 0.1
        ref = advance(h / 8, 8)
        err_h = np.abs(advance(h, 1) - ref).max()
        err_h2 = np.abs(advance(h / 2, 2) - ref).max()
        assert err_h / err_h2 > 12.0    # 4th order gives ~16

    def test_band_stays_sine(self):
        om = SineField.from_modes({(1, 2): 1.0, (3, 1): -0.3}, 8)
        st = step_rk4(SimState(om, 0.0, 0, make_config(n_modes=8, n_grid=16)), 0.02)
        assert st.omega.coeffs.shape == (8, 8)
        assert np.isfinite(st.omega.coeffs).all()

    def test_bad_dt(self):
        st = SimState(SineField.zeros(8), 0.0, 0, make_config(n_modes=8, n_grid=16))
        with pytest.raises(ValueError, match="dt"):
            step_rk4(st, -0.1)


class TestCflDt:
    def test_zero_velocity(self):
        zero = GridField(np.zeros((16, 16)))
        u = VelocityField(zero, zero, 0.5)
        assert cfl_dt(u, 16, 0.4, dt_max=0.05) == 0.05

    def test_grid_scaling(self):
        om = SineField.from_modes({(1, 1): 1.0}, 8)
        u16 = velocity_from_vorticity(om, 0.5, 16)
        u32 = velocity_from_vorticity(om, 0.5, 32)
        assert cfl_dt(u32, 32, 0.4) == pytest.approx(cfl_dt(u16, 16, 0.4) / 2, rel=0.05)

    def test_plateau_data_positive(self):
        om = build_omega0(InitialDataSpec(delta=0.35, n_modes=64, n_grid=144))
        u = velocity_from_vorticity(om, 0.5, 144)
        dt = cfl_dt(u, 144, 0.4)
        assert 0 < dt < 0.05

    def test_safety_validated(self):
        zero = GridField(np.zeros((8, 8)))
        with pytest.raises(ValueError, match="safety"):
            cfl_dt(VelocityField(zero, zero, 0.5), 8, 0.6)


class TestRun:
    def test_horizon_zero(self):
        res = run(make_config(t_final=0.0), SineField.from_modes({(1, 1): 1.0}, 16))
        assert res.halt_reason == "horizon"
        assert len(res.diagnostics) == 1
        assert res.diagnostics[0].time == 0.0
        assert len(res.snapshots) == 1

    def test_stationary_flat_diagnostics(self):
        res = run(make_config(t_final=2.0, n_modes=8, n_grid=16, diag_every=2),
                  SineField.from_modes({(1, 1): 1.0}, 8))
        assert res.halt_reason == "horizon"
        hess = [d.hessian_sup for d in res.diagnostics]
        assert max(hess) - min(hess) < 1e-10
        l2 = [d.l2_norm for d in res.diagnostics]
        assert max(l2) - min(l2) < 1e-12
        assert res.state.time == pytest.approx(2.0)

    def test_conservation_short_plateau_run(self):
        om = build_omega0(InitialDataSpec(delta=0.35, n_modes=64, n_grid=144))
        cfg = make_config(n_modes=64, n_grid=144, t_final=0.2, delta=0.35,
                          diag_every=2, snapshot_every=10)
        res = run(cfg, om)
        assert res.halt_reason == "horizon"
        d0, d1 = res.diagnostics[0], res.diagnostics[-1]
        assert abs(d1.l2_norm - d0.l2_norm) / d0.l2_norm < 1e-9
        omax = [d.omega_max for d in res.diagnostics]
        assert (max(omax) - omax[0]) / omax[0] < 1e-3
        # transported degeneracy stays at rounding with the projection on
        assert max(d.degeneracy for d in res.diagnostics) < 1e-11

    def test_degeneracy_projection_matters(self):
        om = build_omega0(InitialDataSpec(delta=0.35, n_modes=64, n_grid=144))
        on = run(make_config(n_modes=64, n_grid=144, t_final=0.1, diag_every=5,
                             preserve_degeneracy=True), om)
        off = run(make_config(n_modes=64, n_grid=144, t_final=0.1, diag_every=5,
                              preserve_degeneracy=False), om)
        deg_on = max(d.degeneracy for d in on.diagnostics)
        deg_off = max(d.degeneracy for d in off.diagnostics)
        assert deg_on < 1e-11
        assert deg_off > 100 * max(deg_on, 1e-15)

    def test_nan_halt_with_dump(self, tmp_path):
        wild = SineField(np.full((16, 16), 1e200))
        cfg = make_config(t_final=1.0, dt_policy="fixed", dt=1e-3,
                          out_dir=str(tmp_path))
        res = run(cfg, wild)
        assert res.halt_reason == "nan"
        assert (tmp_path / "state_dump.msqg").exists()

    def test_outputs_written(self, tmp_path):
        cfg = make_config(t_final=0.1, n_modes=8, n_grid=16, diag_every=1,
                          snapshot_every=2, out_dir=str(tmp_path))
        res = run(cfg, SineField.from_modes({(1, 1): 1.0, (2, 2): 0.1}, 8))
        assert (tmp_path / "diagnostics.csv").exists()
        assert (tmp_path / "metadata.json").exists()
        assert len(list(tmp_path.glob("snap_*.msqg"))) >= 2
        header = (tmp_path / "diagnostics.csv").read_text().splitlines()[0]
        assert header == "time,hessian_sup,omega_max,l2_norm,degeneracy,dt"
        import json

        meta = json.loads((tmp_path / "metadata.json").read_text())
        assert meta["spectral_filter"] is False
        assert meta["preserve_degeneracy"] is True
        assert meta["halt_reason"] == res.halt_reason

    def test_spectral_filter_recorded(self, tmp_path):
        cfg = make_config(t_final=0.05, n_modes=8, n_grid=16,
                          spectral_filter=True, out_dir=str(tmp_path))
        run(cfg, SineField.from_modes({(1, 1): 1.0}, 8))
        import json

        meta = json.loads((tmp_path / "metadata.json").read_text())
        assert meta["spectral_filter"] is True

    def test_mode_mismatch_rejected(self):
        with pytest.raises(ValueError, match="truncation order"):
            run(make_config(n_modes=16, n_grid=32), SineField.zeros(8))
