"""Baseline PID tracking controller (used for data collection and hover pre-roll)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PidGains:
    """Per-coordinate bandwidths ``omega``; gains place a triple pole at ``-omega``
    for the nominal double integrator ``Mbar chi'' = tau``."""

    omega: tuple[float, ...] = (3.0, 3.0, 8.0, 8.0, 8.0)
    integral_limit: float = 50.0  # bound on the integral state (anti-windup), in error-seconds

    def coefficients(self):
        w = np.asarray(self.omega, dtype=np.float64)
        return 3 * w, 3 * w * w, w**3


class PidController:
    """``tau = Mbar (a_d - kd e_dot - kp e - ki int e)``, evaluated per control tick."""

    def __init__(self, gains: PidGains, mbar, batch_shape: tuple[int, ...] = ()):
        self.gains = gains
        self.mbar = np.asarray(mbar, dtype=np.float64)
        n = self.mbar.size
        if len(gains.omega) != n:
            raise ValueError(f"PID needs {n} bandwidths")
        self.integral = np.zeros(tuple(batch_shape) + (n,))

    def __call__(self, e, e_dot, acc_desired, dt: float) -> np.ndarray:
        kd, kp, ki = self.gains.coefficients()
        lim = self.gains.integral_limit
        self.integral = np.clip(self.integral + dt * np.asarray(e), -lim, lim)
        return self.mbar * (np.asarray(acc_desired) - kd * e_dot - kp * e - ki * self.integral)
