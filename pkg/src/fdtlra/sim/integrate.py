from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels as _k
from .disturbance import NoiseState, advance_noise
from .plant import PlantModel, coriolis_matrix, gravity_vector, mass_matrix


@dataclass
class GeneralizedState:
    chi: np.ndarray
    chi_dot: np.ndarray
    chi_ddot: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.chi = np.asarray(self.chi, dtype=np.float64)
        self.chi_dot = np.asarray(self.chi_dot, dtype=np.float64)
        self.chi_ddot = np.asarray(self.chi_ddot, dtype=np.float64)
        if not (self.chi.shape == self.chi_dot.shape == self.chi_ddot.shape):
            raise ValueError("chi, chi_dot and chi_ddot must share one shape")
        if not all(np.all(np.isfinite(v)) for v in (self.chi, self.chi_dot, self.chi_ddot)):
            raise FloatingPointError(f"non-finite state at t={self.t}")

    @classmethod
    def at_rest(cls, chi, t: float = 0.0) -> "GeneralizedState":
        chi = np.asarray(chi, dtype=np.float64)
        return cls(chi.copy(), np.zeros_like(chi), np.zeros_like(chi), t)

    def copy(self) -> "GeneralizedState":
        return replace(self, chi=self.chi.copy(), chi_dot=self.chi_dot.copy(),
                       chi_ddot=self.chi_ddot.copy())


def bias_forces(model: PlantModel, chi, chi_dot, eta, payload_mass: float) -> np.ndarray:
    """``C chi_dot + g + d`` with the noise sample ``eta`` held fixed."""
    C = coriolis_matrix(model, chi, chi_dot, payload_mass)
    h = np.einsum("...ij,...j->...i", C, chi_dot)
    h += gravity_vector(model, chi, payload_mass)
    h += np.asarray(model.drag) * chi_dot + eta
    return h


def forward_dynamics(model: PlantModel, chi, chi_dot, tau, eta, payload_mass: float) -> np.ndarray:
    """``chi_ddot = M^-1 (tau - C chi_dot - g - d)``."""
    M = mass_matrix(model, chi, payload_mass)
    rhs = np.asarray(tau, dtype=np.float64) - bias_forces(model, chi, chi_dot, eta, payload_mass)
    try:
        return np.linalg.solve(M, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("singular mass matrix: non-physical plant parameters") from exc


def _kernel_args(model: PlantModel):
    L, D, _, _, rot = model._geometry
    return (L, D, rot, np.asarray(model.link_masses, dtype=np.float64), model.fixed_mass(),
            model.gravity, np.asarray(model.drag, dtype=np.float64))


def advance(model: PlantModel, state: GeneralizedState, tau, dt: float, n_steps: int,
            noise: NoiseState) -> GeneralizedState:
    """``n_steps`` consecutive RK4 steps of size ``dt`` with ``tau`` held (zero-order hold).

    Equivalent to calling :func:`step` ``n_steps`` times; the loop runs in a
    compiled kernel.  Works on single states ``(n,)`` and batches ``(B, n)``.
    """
    if dt <= 0 or n_steps < 1:
        raise ValueError("dt must be positive and n_steps >= 1")
    tau = np.asarray(tau, dtype=np.float64)
    if tau.shape[-1] != model.n:
        raise ValueError(f"tau must have length {model.n}")
    single = state.chi.ndim == 1
    X = np.atleast_2d(state.chi)
    V = np.atleast_2d(state.chi_dot)
    E = np.atleast_2d(noise.eta)
    taus = np.ascontiguousarray(np.broadcast_to(tau, X.shape))
    white = noise.white(model.n, count=n_steps)
    white = white[None] if single else white
    times = state.t + dt * np.arange(n_steps + 1)
    payload = np.array([model.payload.mass_at(t) for t in times[:-1]] + [model.payload.mass_at(times[-1])])
    rho = float(np.exp(-2.0 * np.pi * model.noise_bandwidth * dt))
    amp = np.asarray(model.noise_amplitude, dtype=np.float64) / np.sqrt(2.0)
    Xn, Vn, En, An = _k.rk4_run(X, V, taus, E, white, rho, amp, payload, dt, *_kernel_args(model))
    if single:
        Xn, Vn, En, An = Xn[0], Vn[0], En[0], An[0]
    noise.eta = En
    return GeneralizedState(Xn, Vn, An, state.t + n_steps * dt)


def step(model: PlantModel, state: GeneralizedState, tau, dt: float, noise: NoiseState) -> GeneralizedState:
    """Advance ``dt`` seconds with classical RK4, holding ``tau`` and the noise sample.

    After the step the noise filter advances once and the returned
    ``chi_ddot`` is the forward-dynamics acceleration at the new state under
    the same ``tau``.
    """
    return advance(model, state, tau, dt, 1, noise)


def step_reference(model: PlantModel, state: GeneralizedState, tau, dt: float,
                   noise: NoiseState) -> GeneralizedState:
    """Pure-numpy RK4 step built on :func:`forward_dynamics` (slow; used as a cross-check)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    tau = np.asarray(tau, dtype=np.float64)
    mp = model.payload.mass_at(state.t)
    eta = noise.eta
    x, v = state.chi, state.chi_dot

    def f(xx, vv):
        return forward_dynamics(model, xx, vv, tau, eta, mp)

    a1 = f(x, v)
    v2 = v + 0.5 * dt * a1
    a2 = f(x + 0.5 * dt * v, v2)
    v3 = v + 0.5 * dt * a2
    a3 = f(x + 0.5 * dt * v2, v3)
    v4 = v + dt * a3
    a4 = f(x + dt * v3, v4)
    x_new = x + dt / 6.0 * (v + 2 * v2 + 2 * v3 + v4)
    v_new = v + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
    advance_noise(model, noise, dt)
    t_new = state.t + dt
    acc = forward_dynamics(model, x_new, v_new, tau, noise.eta, model.payload.mass_at(t_new))
    return GeneralizedState(x_new, v_new, acc, t_new)


def measure_velocity(model: PlantModel, chi_dot, noise: NoiseState) -> np.ndarray:
    """Velocity as a sensor reports it (additive Gaussian noise)."""
    return np.asarray(chi_dot) + np.asarray(model.velocity_noise_std) * noise.sensor(model.n)


def total_energy(model: PlantModel, state: GeneralizedState):
    from .plant import kinetic_energy, potential_energy
    mp = model.payload.mass_at(state.t)
    return (kinetic_energy(model, state.chi, state.chi_dot, mp)
            + potential_energy(model, state.chi, mp))
