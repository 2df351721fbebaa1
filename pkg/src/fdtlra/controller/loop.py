"""Closed-loop simulation: 100 Hz control ticks on a 1 kHz physics substrate.

Each tick measures the state, appends ``(chi, chi_dot, tau_prev)`` to the
history window, forms the measured residual of the previous interval,
forecasts, adapts, and applies the new input with a zero-order hold.  Every
quantity is batched over independent noise seeds.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..fdt.window import HistoryWindow
from ..lra.adapter import AdapterConfig, AdapterState, adapt_predict, maybe_reset, rls_update
from ..sim.dataset import ResidualLog
from ..sim.disturbance import NoiseState
from ..sim.integrate import GeneralizedState, advance, bias_forces, forward_dynamics, measure_velocity
from ..sim.plant import PlantModel, gravity_vector, mass_matrix
from .law import ControllerGains, adaptive_gain_step, control_input, sliding_variable
from .pid import PidController, PidGains

MODES = ("pid", "none", "fdt", "fdt_lra", "oracle")


class DoubleIntegratorPlant:
    """``Mbar chi'' = tau`` exactly: a plant whose residual is identically zero."""

    def __init__(self, mbar):
        self.mbar = np.asarray(mbar, dtype=np.float64)
        self.n = self.mbar.size

    def equilibrium_input(self, chi):
        return np.zeros_like(chi)

    def acceleration(self, chi, chi_dot, tau, noise, t):
        return np.asarray(tau) / self.mbar

    def inverse_dynamics(self, chi, chi_dot, acc, noise, t):
        return self.mbar * acc

    def advance(self, state, tau, dt, n_steps, noise):
        h = dt * n_steps
        a = np.asarray(tau) / self.mbar
        return GeneralizedState(state.chi + h * state.chi_dot + 0.5 * h * h * a, state.chi_dot + h * a,
                                a, state.t + h)

    def measure(self, chi_dot, noise):
        return np.asarray(chi_dot).copy()


class MultibodyPlant:
    """Adapter around :class:`PlantModel` exposing what the loop needs."""

    def __init__(self, model: PlantModel):
        self.model = model
        self.n = model.n

    def equilibrium_input(self, chi):
        return gravity_vector(self.model, chi, self.model.payload.initial)

    def acceleration(self, chi, chi_dot, tau, noise, t):
        return forward_dynamics(self.model, chi, chi_dot, tau, noise.eta, self.model.payload.mass_at(t))

    def inverse_dynamics(self, chi, chi_dot, acc, noise, t):
        mp = self.model.payload.mass_at(t)
        M = mass_matrix(self.model, chi, mp)
        return np.einsum("...ij,...j->...i", M, acc) + bias_forces(self.model, chi, chi_dot, noise.eta, mp)

    def advance(self, state, tau, dt, n_steps, noise):
        return advance(self.model, state, tau, dt, n_steps, noise)

    def measure(self, chi_dot, noise):
        return measure_velocity(self.model, chi_dot, noise)


def as_plant(plant):
    return MultibodyPlant(plant) if isinstance(plant, PlantModel) else plant


@dataclass(frozen=True)
class LoopConfig:
    mode: str = "fdt_lra"
    control_rate: float = 100.0
    substeps: int = 10          # physics steps per control tick (1 kHz at 100 Hz control)
    pre_roll: float = 3.0       # seconds of PID hover before t = 0 (fills the history window)
    initial_offset: tuple[float, ...] | None = None  # added to chi_d(0) at the start
    # "interval_mean" feeds forward the mean desired acceleration over the hold
    # interval, (chi_d_dot(t+dt) - chi_d_dot(t))/dt, which is exact under a
    # zero-order hold; "sample" uses chi_d_ddot(t)
    feedforward: str = "interval_mean"
    # acceleration behind the measured residual: "true" (simulator ground truth) or
    # "differentiated" (backward difference of the measured velocity, as on hardware)
    acceleration: str = "true"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.feedforward not in ("interval_mean", "sample"):
            raise ValueError("feedforward must be 'interval_mean' or 'sample'")
        if self.acceleration not in ("true", "differentiated"):
            raise ValueError("acceleration must be 'true' or 'differentiated'")
        if self.control_rate <= 0 or self.substeps < 1 or self.pre_roll < 0:
            raise ValueError("control_rate > 0, substeps >= 1 and pre_roll >= 0 required")

    @property
    def dt(self) -> float:
        return 1.0 / self.control_rate


LOG_SIGNALS = ("chi_d", "chi", "e", "s", "tau", "r", "r_base", "r_adapted")


@dataclass
class ClosedLoopLog:
    """Per-tick signals with shape ``(B, T, ...)``; ``t`` is shared, ``t < 0`` is the pre-roll."""

    seeds: tuple[int, ...]
    t: np.ndarray
    chi_d: np.ndarray
    chi: np.ndarray
    chi_dot: np.ndarray     # measured
    chi_ddot: np.ndarray    # acceleration used for the measured residual
    e: np.ndarray
    s: np.ndarray
    tau: np.ndarray         # applied from this tick on
    tau_prev: np.ndarray    # held over the preceding interval
    r: np.ndarray
    r_base: np.ndarray
    r_adapted: np.ndarray
    sigma_hat: np.ndarray
    eps_ema_norm: np.ndarray
    reset: np.ndarray
    alpha: np.ndarray | None = None
    tick_wall: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def active(self) -> np.ndarray:
        return self.t >= 0

    def tracking_rmse(self, coords=None) -> np.ndarray:
        """Per-seed RMSE of ``||e||`` over the active part (all generalized coordinates by default)."""
        e = self.e[:, self.active]
        if coords is not None:
            e = e[..., list(coords)]
        return np.sqrt(np.mean(np.sum(e * e, axis=-1), axis=-1))

    def residual_logs(self, include_pre_roll: bool = False) -> list[ResidualLog]:
        m = slice(None) if include_pre_roll else self.active
        return [ResidualLog(self.t[m], self.chi[b, m], self.chi_dot[b, m], self.chi_ddot[b, m],
                            self.tau_prev[b, m], self.r[b, m]) for b in range(len(self.seeds))]

    def columns(self) -> list[str]:
        n = self.chi.shape[-1]
        cols = ["seed", "t"] + [f"{name}_{i}" for name in LOG_SIGNALS for i in range(n)]
        return cols + ["sigma_hat", "eps_ema_norm", "reset"]

    def write_csv(self, path, members=None) -> None:
        """Text log; ``members`` selects batch rows (default all).  Wall times are kept out
        of this file so that re-runs are byte-identical (see :meth:`write_timing`)."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        members = range(len(self.seeds)) if members is None else members
        T = self.t.size
        with open(path, "w") as fh:
            fh.write(",".join(self.columns()) + "\n")
            for b in members:
                block = np.column_stack([np.full(T, self.seeds[b], dtype=np.float64), self.t]
                                        + [getattr(self, k)[b] for k in LOG_SIGNALS]
                                        + [self.sigma_hat[b], self.eps_ema_norm[b], self.reset[b].astype(float)])
                np.savetxt(fh, block, fmt="%.17g", delimiter=",")

    def write_timing(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(path, np.column_stack([self.t, 1e6 * self.tick_wall]), fmt="%.6f", delimiter=",",
                   header="t,tick_wall_us", comments="")


def _reference(trajs, t: float, n: int, batch: int, hold: float | None = None):
    """Desired state at ``t`` for every batch member; the pre-roll holds the start point.

    With ``hold`` set, the acceleration is the mean over ``[t, t + hold]``.
    """
    out = np.zeros((3, batch, n))
    for b, tr in enumerate(trajs):
        p, dp, ddp = tr(max(t, 0.0))
        out[0, b] = p
        if t >= 0:
            out[1, b] = dp
            out[2, b] = ddp if hold is None else (tr(t + hold)[1] - dp) / hold
    return out


def run_closed_loop(plant, trajectory, duration: float, seeds, gains: ControllerGains,
                    cfg: LoopConfig = LoopConfig(), model=None, adapter: AdapterConfig | None = None,
                    pid: PidGains | None = None, record_alpha: bool = False) -> ClosedLoopLog:
    """Simulate a batch of closed-loop runs, one per seed.

    ``trajectory`` is a reference callable or a list of them (one per seed).
    Modes: ``pid`` (baseline tracker throughout), ``none`` (residual
    controller with ``r_hat = 0``), ``fdt`` (frozen forecast), ``fdt_lra``
    (forecast plus online adapter) and ``oracle`` (exact inverse dynamics for
    the commanded acceleration).  While the history window is underfilled the
    forecast is replaced by zero.
    """
    plant = as_plant(plant)
    seeds = tuple(int(s) for s in np.atleast_1d(seeds))
    B, n = len(seeds), plant.n
    if gains.n != n:
        raise ValueError(f"gains are for n={gains.n}, plant has n={n}")
    trajs = list(trajectory) if isinstance(trajectory, (list, tuple)) else [trajectory] * B
    if len(trajs) != B:
        raise ValueError("need one trajectory per seed")
    mode = cfg.mode
    if mode in ("fdt", "fdt_lra") and model is None:
        raise ValueError(f"mode {mode!r} needs a trained model")
    if model is not None and model.cfg.n != n:
        raise ValueError("model and plant dimensions differ")
    adapter = adapter or AdapterConfig()
    phi, lam, mbar = gains.arrays()
    dt = cfg.dt
    hold = dt if cfg.feedforward == "interval_mean" else None

    n_pre = int(round(cfg.pre_roll * cfg.control_rate))
    n_run = int(round(duration * cfg.control_rate))
    times = (np.arange(n_pre + n_run) - n_pre) * dt
    T = times.size

    amp = getattr(getattr(plant, "model", None), "noise_amplitude", None)
    noise = NoiseState.from_seed(list(seeds), n, amp)
    ref0 = _reference(trajs, times[0], n, B)
    chi0 = ref0[0] + (0.0 if cfg.initial_offset is None else np.asarray(cfg.initial_offset))
    tau_prev = plant.equilibrium_input(chi0)
    state = GeneralizedState(chi0, np.zeros_like(chi0),
                             plant.acceleration(chi0, np.zeros_like(chi0), tau_prev, noise, times[0]), times[0])

    pid_ctl = PidController(pid or PidGains(), mbar, (B,))
    _, _, ki = pid_ctl.gains.coefficients()
    pid_ctl.integral[...] = -tau_prev / (mbar * ki)  # start from the hover input

    window = HistoryWindow(model.cfg.T_l, 3 * n, (B,)) if model is not None else None
    ad_state = AdapterState.initial(model.latent_dim, n, adapter, (B,)) if mode == "fdt_lra" else None
    sigma = np.full(B, gains.sigma_hat0)

    rec = {k: np.zeros((B, T, n)) for k in ("chi_d", "chi", "chi_dot", "chi_ddot", "e", "s", "tau",
                                            "tau_prev", "r", "r_base", "r_adapted")}
    rec_sigma = np.zeros((B, T))
    rec_eps = np.zeros((B, T))
    rec_reset = np.zeros((B, T), dtype=bool)
    rec_alpha = np.full((B, T, 3 * n), np.nan) if record_alpha and model is not None else None
    wall = np.zeros(T)

    for k, t in enumerate(times):
        t0 = time.perf_counter()
        chi_d, dchi_d, ddchi_d = _reference(trajs, t, n, B, hold)
        chi = state.chi
        chi_dot = plant.measure(state.chi_dot, noise)
        if cfg.acceleration == "differentiated" and k > 0:
            acc_meas = (chi_dot - chi_dot_prev) / dt
        else:
            acc_meas = state.chi_ddot
        chi_dot_prev = chi_dot
        r = tau_prev - mbar * acc_meas
        if window is not None:
            window.push(chi, chi_dot, tau_prev)
        e = chi - chi_d
        e_dot = chi_dot - dchi_d
        s = sliding_variable(e, e_dot, phi)
        base = np.zeros((B, n))
        adapted = base
        fired = np.zeros(B, dtype=bool)

        if t < 0 or mode == "pid":
            tau = pid_ctl(e, e_dot, ddchi_d, dt)
        else:
            if mode in ("fdt", "fdt_lra") and window.full:
                fc = model.predict_history(window.last(model.cfg.T_l))
                base = fc.one_step
                adapted = base
                if rec_alpha is not None and fc.alpha is not None:
                    rec_alpha[:, k] = fc.alpha
                if ad_state is not None:
                    rls_update(ad_state, fc.latent, r, base, adapter)
                    _, fired = maybe_reset(ad_state, adapter)
                    adapted = adapt_predict(base, fc.latent, ad_state)
            if gains.switching:
                sigma = adaptive_gain_step(sigma, s, gains.nu, dt, gains.sigma_floor)
            tau = control_input(ddchi_d, e_dot, s, adapted, sigma, gains)
            if mode == "oracle":
                acc = tau / mbar
                tau = plant.inverse_dynamics(chi, state.chi_dot, acc, noise, t)
                adapted = tau - mbar * acc
                base = adapted

        for key, val in (("chi_d", chi_d), ("chi", chi), ("chi_dot", chi_dot), ("chi_ddot", acc_meas),
                         ("e", e), ("s", s), ("tau", tau), ("tau_prev", tau_prev), ("r", r),
                         ("r_base", base), ("r_adapted", adapted)):
            rec[key][:, k] = val
        rec_sigma[:, k] = sigma
        if ad_state is not None:
            rec_eps[:, k] = np.linalg.norm(ad_state.eps_ema, axis=-1)
        rec_reset[:, k] = fired

        state = plant.advance(state, tau, dt / cfg.substeps, cfg.substeps, noise)
        tau_prev = np.array(tau, dtype=np.float64)
        wall[k] = time.perf_counter() - t0

    return ClosedLoopLog(seeds, times, rec["chi_d"], rec["chi"], rec["chi_dot"], rec["chi_ddot"], rec["e"],
                         rec["s"], rec["tau"], rec["tau_prev"], rec["r"], rec["r_base"], rec["r_adapted"],
                         rec_sigma, rec_eps, rec_reset, rec_alpha, wall)
