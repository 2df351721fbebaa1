import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdtlra.controller import (ControllerGains, DoubleIntegratorPlant, LoopConfig, PidController, PidGains,
                               adaptive_gain_step, control_input, run_closed_loop, sliding_variable,
                               switching_direction)
from fdtlra.controller.law import PLANAR_INDEX, TABLE_LAMBDA, TABLE_MBAR, TABLE_PHI
from fdtlra.fdt import FdtConfig, FdtModel
from fdtlra.sim.disturbance import PayloadSchedule
from fdtlra.sim.plant import PlantModel
from fdtlra.sim.trajectory import reference_trajectory

GAINS = ControllerGains.table_defaults(5)
QUIET = PlantModel(noise_amplitude=(0.0,) * 5, velocity_noise_std=(0.0,) * 5)


def _hold(point):
    p = np.asarray(point, dtype=np.float64)
    return lambda t: (p.copy(), np.zeros_like(p), np.zeros_like(p))


def _decay_rate(log, t_from=0.2, member=0):
    sn = np.linalg.norm(log.s[member], axis=-1)
    m = log.t >= t_from
    return -np.polyfit(log.t[m], np.log(sn[m]), 1)[0]


# ------------------------------------------------------------ sliding variable

def test_sliding_variable_zero():
    np.testing.assert_array_equal(sliding_variable(np.zeros(5), np.zeros(5), GAINS.phi), 0.0)


def test_sliding_variable_unit_gain():
    e = np.array([1.0, 0, 0, 0, 0])
    np.testing.assert_array_equal(sliding_variable(e, np.zeros(5), np.ones(5)), e)


@pytest.mark.parametrize("seed", range(10))
def test_sliding_variable_componentwise(seed):
    rng = np.random.default_rng(seed)
    phi = rng.uniform(0.1, 5, size=5)
    e, ed = rng.normal(size=5), rng.normal(size=5)
    s = sliding_variable(e, ed, phi)
    for i in range(5):
        assert s[i] == pytest.approx(ed[i] + phi[i] * e[i], abs=1e-15)
    np.testing.assert_allclose(sliding_variable(e, ed, np.diag(phi)), s, atol=1e-15)


def test_sliding_variable_shape_checks():
    with pytest.raises(ValueError):
        sliding_variable(np.zeros(5), np.zeros(4), np.ones(5))
    with pytest.raises(ValueError):
        sliding_variable(np.zeros(5), np.zeros(5), np.ones(4))


# ------------------------------------------------------------ control law

def test_control_input_zero_case():
    z = np.zeros(5)
    np.testing.assert_array_equal(control_input(z, z, z, z, 0.1, GAINS), 0.0)


@pytest.mark.parametrize("seed", range(5))
def test_control_input_formula(seed):
    rng = np.random.default_rng(seed)
    add, ed, s, r = rng.normal(size=(4, 5))
    sig = 0.7
    phi, lam, mbar = map(np.diag, GAINS.arrays())
    sat = s / max(GAINS.eps_bl, np.linalg.norm(s))
    expect = mbar @ (add - phi @ ed) - lam @ s + r - sig * sat
    np.testing.assert_allclose(control_input(add, ed, s, r, sig, GAINS), expect, atol=1e-13)


def test_switching_saturates_to_unit_vector():
    s = np.array([3.0, -4.0, 0, 0, 0])
    d = switching_direction(s, 0.01)
    assert np.linalg.norm(d) == pytest.approx(1.0)
    z = np.zeros(5)
    tau_on = control_input(z, z, s, z, 2.5, GAINS)
    tau_off = control_input(z, z, s, z, 2.5, ControllerGains.table_defaults(5, switching=False))
    assert np.linalg.norm(tau_off - tau_on) == pytest.approx(2.5)


def test_switching_linear_inside_boundary_layer():
    s = np.array([1e-3, 0, 2e-3, 0, 0])
    np.testing.assert_allclose(switching_direction(s, 0.01), s / 0.01)
    np.testing.assert_array_equal(switching_direction(np.zeros(5), 0.01, smooth=False), 0.0)
    np.testing.assert_allclose(switching_direction(s, 0.01, smooth=False), s / np.linalg.norm(s))


# ------------------------------------------------------------ adaptive gain

def test_gain_decays_geometrically_without_error():
    sig, dt = 0.1, 0.01
    seq = [sig]
    for _ in range(50):
        seq.append(float(adaptive_gain_step(seq[-1], np.zeros(5), 2.0, dt)))
    np.testing.assert_allclose(np.array(seq[1:]) / np.array(seq[:-1]), 1 - 2.0 * dt, rtol=1e-12)


def test_gain_stops_at_floor():
    sig = 1e-5
    for _ in range(2000):
        sig = adaptive_gain_step(sig, np.zeros(5), 2.0, 0.01, floor=1e-6)
    assert sig == 1e-6


@pytest.mark.parametrize("c", [0.05, 1.0, 4.0])
def test_gain_reaches_equilibrium(c):
    nu, dt = 2.0, 0.01
    s = np.zeros(5)
    s[0] = c
    sig = 0.1
    for _ in range(int(round(5 / nu / dt))):
        sig = adaptive_gain_step(sig, s, nu, dt)
    assert abs(sig - c / nu) <= 0.02 * c / nu


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 50), min_size=1, max_size=200), st.floats(1e-4, 0.4))
def test_gain_stays_positive(norms, dt):
    sig = 0.1
    for v in norms:
        s = np.array([v, 0, 0, 0, 0])
        sig = adaptive_gain_step(sig, s, 2.0, dt)
        assert sig >= 1e-6


def test_gain_step_rejects_bad_input():
    with pytest.raises(ValueError):
        adaptive_gain_step(0.1, np.zeros(5), 2.0, 0.0)
    with pytest.raises(ValueError):
        adaptive_gain_step(0.0, np.zeros(5), 2.0, 0.01)


# ------------------------------------------------------------ gains

def test_table_defaults():
    assert GAINS.phi == (1.0, 1.5, 1.1, 1.2, 1.2)
    assert GAINS.lam == (2.0, 3.5, 1.5, 3.0, 3.0)
    assert GAINS.mbar == (2.0, 2.0, 0.02, 0.05, 0.05)
    assert (GAINS.nu, GAINS.sigma_hat0) == (2.0, 0.1)
    assert GAINS.s_decay_rate() == pytest.approx(1.0)
    full = ControllerGains.table_defaults(8)
    assert (full.phi, full.lam, full.mbar) == (TABLE_PHI, TABLE_LAMBDA, TABLE_MBAR)
    assert len(PLANAR_INDEX) == 5


@pytest.mark.parametrize("bad", [dict(nu=0.0), dict(sigma_hat0=-1.0), dict(eps_bl=0.0),
                                 dict(sigma_floor=1.0)])
def test_gain_validation(bad):
    with pytest.raises(ValueError):
        ControllerGains.table_defaults(5, **bad)
    with pytest.raises(ValueError):
        ControllerGains((1.0, -1.0), (1.0, 1.0), (1.0, 1.0))
    with pytest.raises(ValueError):
        ControllerGains.table_defaults(6)


def test_pid_integral_clipped():
    pid = PidController(PidGains(integral_limit=0.5), np.ones(5))
    for _ in range(100):
        pid(np.ones(5), np.zeros(5), np.zeros(5), 0.01)
    np.testing.assert_array_equal(pid.integral, 0.5)
    kd, kp, ki = (np.asarray(c) for c in PidGains().coefficients())
    np.testing.assert_allclose(kp**2, 3 * kd * ki)  # triple real pole


# ------------------------------------------------------------ closed loop

def test_zero_residual_plant_tracks_figure8():
    traj = reference_trajectory("figure8", 1.0, 10.0, ramp=1.0)
    log = run_closed_loop(DoubleIntegratorPlant(GAINS.mbar), traj, 10.0, [0], GAINS,
                          LoopConfig(mode="none", pre_roll=0.0))
    assert log.tracking_rmse()[0] < 1e-3
    np.testing.assert_allclose(log.r, 0.0, atol=1e-9)


def test_interval_mean_feedforward_beats_sampled():
    traj = reference_trajectory("figure8", 1.0, 6.0, ramp=1.0)
    plant = DoubleIntegratorPlant(GAINS.mbar)
    a = run_closed_loop(plant, traj, 6.0, [0], GAINS, LoopConfig(mode="none", pre_roll=0.0))
    b = run_closed_loop(plant, traj, 6.0, [0], GAINS, LoopConfig(mode="none", pre_roll=0.0, feedforward="sample"))
    assert a.tracking_rmse()[0] < 0.1 * b.tracking_rmse()[0]


def test_oracle_decay_at_rest_matches_design_rate():
    g = ControllerGains.table_defaults(5, switching=False)
    hover = np.array([0.0, 0.5, 0.0, 0.3, 1.2])
    log = run_closed_loop(QUIET, _hold(hover), 2.0, [0], g,
                          LoopConfig(mode="oracle", pre_roll=0.0, initial_offset=(0.3, 0, 0, 0, 0)))
    assert _decay_rate(log) == pytest.approx(g.s_decay_rate(), rel=0.01)
    sn = np.linalg.norm(log.s[0], axis=-1)[log.t >= 0.2]
    assert np.all(np.diff(sn) <= 0)


def test_oracle_compensation_beats_none():
    pm = PlantModel(payload=PayloadSchedule.constant(0.3))
    seeds = list(range(20))
    for kind in ("s_shape", "figure8"):
        traj = reference_trajectory(kind, 1.0, 4.0, ramp=1.0)
        off = run_closed_loop(pm, traj, 4.0, seeds, GAINS, LoopConfig(mode="none", pre_roll=1.0))
        on = run_closed_loop(pm, traj, 4.0, seeds, GAINS, LoopConfig(mode="oracle", pre_roll=1.0))
        assert np.median(on.tracking_rmse()) < np.median(off.tracking_rmse())
        assert np.all(on.sigma_hat > 0) and np.all(off.sigma_hat > 0)


def test_closed_loop_is_deterministic_and_batched(tmp_path):
    cfg = FdtConfig(n=5, T_s=3, T_l=20, d_model=8, n_heads=2, d_ff=16, k=1, n_layers=1)
    model = FdtModel(cfg, seed=1)
    pm = PlantModel(payload=PayloadSchedule.constant(0.3))
    traj = reference_trajectory("figure8", 1.0, 1.0, ramp=1.0)
    lc = LoopConfig(mode="fdt_lra", pre_roll=0.5)
    a = run_closed_loop(pm, traj, 1.0, [3, 4], GAINS, lc, model=model, record_alpha=True)
    b = run_closed_loop(pm, traj, 1.0, [3, 4], GAINS, lc, model=model, record_alpha=True)
    a.write_csv(tmp_path / "a.csv")
    b.write_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    single = run_closed_loop(pm, traj, 1.0, [4], GAINS, lc, model=model)
    np.testing.assert_allclose(single.e[0], a.e[1], atol=1e-10)  # batch reductions may reorder sums
    ok = np.isfinite(a.alpha).all(-1)
    assert ok[:, a.t >= 0].all()
    np.testing.assert_allclose(a.alpha[ok].sum(-1), 1.0, atol=1e-12)
    assert np.all(a.sigma_hat > 0) and np.all(a.tick_wall > 0)


def test_log_rows_follow_previous_input_convention():
    pm = PlantModel(payload=PayloadSchedule.constant(0.3))
    traj = reference_trajectory("s_shape", 0.5, 1.0, ramp=1.0)
    log = run_closed_loop(pm, traj, 1.0, [0], GAINS, LoopConfig(mode="none", pre_roll=0.5))
    np.testing.assert_array_equal(log.tau_prev[:, 1:], log.tau[:, :-1])
    mbar = np.asarray(GAINS.mbar)
    np.testing.assert_allclose(log.r, log.tau_prev - mbar * log.chi_ddot, atol=1e-12)


def test_differentiated_acceleration_mode():
    traj = reference_trajectory("figure8", 1.0, 1.0, ramp=1.0)
    log = run_closed_loop(QUIET, traj, 1.0, [0], GAINS,
                          LoopConfig(mode="none", pre_roll=0.2, acceleration="differentiated"))
    np.testing.assert_allclose(log.chi_ddot[0, 1:], np.diff(log.chi_dot[0], axis=0) / 0.01, atol=1e-9)


def test_csv_log_layout(tmp_path):
    traj = reference_trajectory("figure8", 1.0, 0.3, ramp=1.0)
    log = run_closed_loop(QUIET, traj, 0.3, [0, 1], GAINS, LoopConfig(mode="none", pre_roll=0.1))
    log.write_csv(tmp_path / "log.csv", members=[1])
    log.write_timing(tmp_path / "timing.csv")
    header = (tmp_path / "log.csv").read_text().splitlines()[0].split(",")
    assert header[:2] == ["seed", "t"] and header[-3:] == ["sigma_hat", "eps_ema_norm", "reset"]
    assert "chi_d_0" in header and "r_adapted_4" in header and not any("wall" in h for h in header)
    data = np.loadtxt(tmp_path / "log.csv", delimiter=",", skiprows=1)
    assert data.shape == (log.t.size, len(header)) and np.all(data[:, 0] == 1)
    np.testing.assert_array_equal(data[:, 1], log.t)
    assert (tmp_path / "timing.csv").read_text().startswith("t,tick_wall_us")


def test_loop_argument_checks():
    traj = reference_trajectory("figure8", 1.0, 1.0)
    with pytest.raises(ValueError):
        run_closed_loop(QUIET, traj, 1.0, [0], GAINS, LoopConfig(mode="fdt"))
    with pytest.raises(ValueError):
        run_closed_loop(QUIET, traj, 1.0, [0], ControllerGains.table_defaults(8), LoopConfig(mode="none"))
    with pytest.raises(ValueError):
        LoopConfig(mode="bogus")
    with pytest.raises(ValueError):
        LoopConfig(acceleration="estimated")
