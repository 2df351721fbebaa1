"""Desired trajectories ``(chi_d, chi_d_dot, chi_d_ddot)`` with analytic derivatives.

Every kind is a path ``p(s)`` in a virtual time ``s`` plus a time warp
``s(t)``.  Without a ramp ``s = t``; with a ramp the virtual clock speeds up
from rest along a quintic smoothstep, so the reference starts at zero velocity
and stays C2.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = ("s_shape", "figure8", "randomized_excitation")

# arm joint ranges used by the pick/place profiles, radians
Q1_RANGE = (np.deg2rad(-20.1), np.deg2rad(37.2))
Q2_RANGE = (np.deg2rad(65.3), np.deg2rad(77.2))

BOX_HEIGHT = 0.10
TABLE_HEIGHT = 0.55
S_SHAPE_WIDTH = 1.2
FIGURE8_HALF_WIDTH = 0.6
FIGURE8_HALF_HEIGHT = 0.15


def _smoothstep_warp(t, ramp):
    """``s(t)``, ``ds/dt``, ``d2s/dt2`` for a quintic ramp of the clock rate."""
    t = np.asarray(t, dtype=np.float64)
    if ramp <= 0:
        return t, np.ones_like(t), np.zeros_like(t)
    x = np.clip(t / ramp, 0.0, 1.0)
    rate = x**3 * (10 - 15 * x + 6 * x * x)
    drate = 30 * x * x * (1 - x) ** 2 / ramp
    integral = ramp * x**4 * (2.5 - 3 * x + x * x)
    s = np.where(t < ramp, integral, t - 0.5 * ramp)
    s = np.where(t < 0, 0.0, s)
    return s, rate, drate


def _cos_bump(phi):
    """``u = (1 - cos phi)/2`` and its first two derivatives in phi."""
    return (1 - np.cos(phi)) / 2, np.sin(phi) / 2, np.cos(phi) / 2


def _pick_place_joints(phi):
    """Arm joints swept across their ranges once (q1) and twice (q2) per cycle."""
    u, du, ddu = _cos_bump(phi)
    v, dv, ddv = _cos_bump(2 * phi)
    (a1, b1), (a2, b2) = Q1_RANGE, Q2_RANGE
    q = np.stack([a1 + (b1 - a1) * u, a2 + (b2 - a2) * v], axis=-1)
    dq = np.stack([(b1 - a1) * du, 2 * (b2 - a2) * dv], axis=-1)
    ddq = np.stack([(b1 - a1) * ddu, 4 * (b2 - a2) * ddv], axis=-1)
    return q, dq, ddq


def _s_shape_path(phi):
    # ping-pong along an S-curve from the box to the table and back
    u, du, ddu = _cos_bump(phi)
    h = TABLE_HEIGHT - BOX_HEIGHT
    c = 2 * np.pi
    z_u = BOX_HEIGHT + h * (u - np.sin(c * u) / c)
    dz_u = h * (1 - np.cos(c * u))
    ddz_u = h * c * np.sin(c * u)
    x = S_SHAPE_WIDTH * u
    dx = S_SHAPE_WIDTH * du
    ddx = S_SHAPE_WIDTH * ddu
    dz = dz_u * du
    ddz = ddz_u * du * du + dz_u * ddu
    return np.stack([x, z_u], -1), np.stack([dx, dz], -1), np.stack([ddx, ddz], -1)


def _figure8_path(phi):
    A, B = FIGURE8_HALF_WIDTH, FIGURE8_HALF_HEIGHT
    p = np.stack([A * np.sin(phi), TABLE_HEIGHT + B * np.sin(2 * phi)], -1)
    dp = np.stack([A * np.cos(phi), 2 * B * np.cos(2 * phi)], -1)
    ddp = np.stack([-A * np.sin(phi), -4 * B * np.sin(2 * phi)], -1)
    return p, dp, ddp


_PATHS = {"s_shape": _s_shape_path, "figure8": _figure8_path}


def cycle_length(kind: str, n_grid: int = 200_001) -> float:
    """Base path length over one phase cycle, by numerical quadrature."""
    phi = np.linspace(0.0, 2 * np.pi, n_grid)
    _, dp, _ = _PATHS[kind](phi)
    return float(np.trapezoid(np.linalg.norm(dp, axis=-1), phi))


@dataclass(frozen=True)
class _Sinusoids:
    centre: np.ndarray     # (n,)
    amp: np.ndarray        # (n, K)
    omega: np.ndarray      # (n, K)
    phase: np.ndarray      # (n, K)

    def __call__(self, s):
        arg = s[..., None, None] * self.omega + self.phase
        p = self.centre + np.sum(self.amp * np.sin(arg), -1)
        dp = np.sum(self.amp * self.omega * np.cos(arg), -1)
        ddp = -np.sum(self.amp * self.omega**2 * np.sin(arg), -1)
        return p, dp, ddp


def _random_sinusoids(rng, speed, n_arm, n_terms=4):
    n = 3 + n_arm
    freqs = rng.uniform(0.08, 0.6, size=(n, n_terms))
    omega = 2 * np.pi * freqs
    phase = rng.uniform(0, 2 * np.pi, size=(n, n_terms))
    w = rng.uniform(0.5, 1.0, size=(n, n_terms))
    amp = np.zeros((n, n_terms))
    # translational RMS speed of each axis ~ speed/sqrt(2)
    for i in (0, 1):
        rms = np.sqrt(0.5 * np.sum((w[i] * omega[i]) ** 2))
        amp[i] = w[i] * (speed / np.sqrt(2)) / rms
    # bound angular excursions: pitch within ~0.15 rad, joints beyond the pick/place ranges
    spans = [0.15] + [np.deg2rad(35.0)] * n_arm
    for j, span in enumerate(spans):
        amp[2 + j] = span * w[2 + j] / w[2 + j].sum()
    centre = np.zeros(n)
    centre[1] = 0.5 * (BOX_HEIGHT + TABLE_HEIGHT)
    if n_arm >= 1:
        centre[3] = np.mean(Q1_RANGE)
    if n_arm >= 2:
        centre[4] = np.mean(Q2_RANGE)
    return _Sinusoids(centre, amp, omega, phase)


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Callable desired trajectory; ``traj(t)`` returns ``(chi_d, chi_d_dot, chi_d_ddot)``."""

    kind: str
    speed: float
    duration: float
    seed: int = 0
    n_arm: int = 2
    ramp: float = 0.0
    period: float = field(init=False, default=float("nan"))
    _sines: object = field(init=False, default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown trajectory kind {self.kind!r}; expected one of {KINDS}")
        if self.speed <= 0:
            raise ValueError("speed must be positive")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.ramp < 0:
            raise ValueError("ramp must be non-negative")
        if self.kind == "randomized_excitation":
            sines = _random_sinusoids(np.random.default_rng(self.seed), self.speed, self.n_arm)
            object.__setattr__(self, "_sines", sines)
        else:
            object.__setattr__(self, "period", cycle_length(self.kind) / self.speed)

    @property
    def n(self) -> int:
        return 3 + self.n_arm

    def phase(self, t):
        """Cycle phase ``phi(t)`` with its first two time derivatives."""
        s, ds, dds = _smoothstep_warp(t, self.ramp)
        w = 2 * np.pi / self.period
        return w * s, w * ds, w * dds

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        s, ds, dds = _smoothstep_warp(t, self.ramp)
        if self._sines is not None:
            p, dp, ddp = self._sines(s)
            ds_, dds_ = ds[..., None], dds[..., None]
            return p, dp * ds_, ddp * ds_**2 + dp * dds_
        w = 2 * np.pi / self.period
        phi, dphi, ddphi = w * s, w * ds, w * dds
        base, dbase, ddbase = _PATHS[self.kind](phi)
        q, dq, ddq = _pick_place_joints(phi)
        zeros = np.zeros(phi.shape + (1,))
        p = np.concatenate([base, zeros, q], -1)
        dp = np.concatenate([dbase, zeros, dq], -1)
        ddp = np.concatenate([ddbase, zeros, ddq], -1)
        if self.n_arm != 2:
            p, dp, ddp = (_resize_arm(a, self.n_arm) for a in (p, dp, ddp))
        f, ff = dphi[..., None], ddphi[..., None]
        return p, dp * f, ddp * f * f + dp * ff

    def sample(self, rate_hz: float = 100.0):
        """Reference sampled on the grid ``0, 1/rate, ...`` strictly below ``duration``."""
        t = np.arange(int(round(self.duration * rate_hz))) / rate_hz
        return (t, *self(t))


def _resize_arm(a, n_arm):
    head, arm = a[..., :3], a[..., 3:]
    if n_arm < 2:
        arm = arm[..., :n_arm]
    else:
        arm = np.concatenate([arm, np.zeros(a.shape[:-1] + (n_arm - 2,))], -1)
    return np.concatenate([head, arm], -1)


def reference_trajectory(kind: str, speed: float, duration: float, seed: int = 0,
                         n_arm: int = 2, ramp: float = 0.0) -> ReferenceTrajectory:
    return ReferenceTrajectory(kind, float(speed), float(duration), int(seed), int(n_arm), float(ramp))


def mean_path_speed(traj: ReferenceTrajectory, n_grid: int = 200_001) -> float:
    """Mean base speed over one full cycle (excludes any ramp)."""
    t0 = traj.ramp
    t = np.linspace(t0, t0 + traj.period, n_grid)
    _, dp, _ = traj(t)
    return float(np.trapezoid(np.linalg.norm(dp[..., :2], axis=-1), t) / traj.period)
