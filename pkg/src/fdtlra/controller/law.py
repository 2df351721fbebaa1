"""Residual-compensated sliding-variable control law with an adaptive switching gain."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..sim.residual import mbar_diagonal

# full-vehicle gain sets, ordered (x, y, z, roll, pitch, yaw, q1, q2)
TABLE_PHI = (1.0, 1.0, 1.5, 1.1, 1.1, 1.0, 1.2, 1.2)
TABLE_LAMBDA = (2.0, 2.0, 3.5, 1.5, 1.5, 1.2, 3.0, 3.0)
TABLE_MBAR = (2.0, 2.0, 2.0, 0.02, 0.02, 0.02, 0.05, 0.05)
# the planar plant keeps x, z, pitch and both arm joints
PLANAR_INDEX = (0, 2, 4, 6, 7)


@dataclass(frozen=True)
class ControllerGains:
    phi: tuple[float, ...]
    lam: tuple[float, ...]
    mbar: tuple[float, ...]
    nu: float = 2.0
    sigma_hat0: float = 0.1
    eps_bl: float = 0.01
    sigma_floor: float = 1e-6
    smooth_switching: bool = True
    switching: bool = True  # False drops the adaptive switching term entirely

    def __post_init__(self):
        n = len(self.phi)
        if len(self.lam) != n or len(self.mbar) != n:
            raise ValueError("phi, lam and mbar must have equal length")
        if min(self.phi) <= 0 or min(self.lam) <= 0:
            raise ValueError("phi and lam must be positive definite (positive diagonal)")
        mbar_diagonal(np.asarray(self.mbar))
        if self.nu <= 0 or self.sigma_hat0 <= 0 or self.eps_bl <= 0 or self.sigma_floor <= 0:
            raise ValueError("nu, sigma_hat0, eps_bl and sigma_floor must be positive")
        if self.sigma_floor > self.sigma_hat0:
            raise ValueError("sigma_floor must not exceed sigma_hat0")

    @classmethod
    def table_defaults(cls, n: int = 5, **kw) -> "ControllerGains":
        if n == 8:
            return cls(TABLE_PHI, TABLE_LAMBDA, TABLE_MBAR, **kw)
        if n == 5:
            pick = lambda v: tuple(v[i] for i in PLANAR_INDEX)  # noqa: E731
            return cls(pick(TABLE_PHI), pick(TABLE_LAMBDA), pick(TABLE_MBAR), **kw)
        raise ValueError("table gains exist for n = 5 (planar) and n = 8 (full vehicle)")

    @property
    def n(self) -> int:
        return len(self.phi)

    def arrays(self):
        return np.asarray(self.phi), np.asarray(self.lam), np.asarray(self.mbar)

    def s_decay_rate(self) -> float:
        """Slowest rate of ``Mbar s' = -Lambda s``: ``min(eig(Lambda Mbar^-1))``."""
        return float(np.min(np.asarray(self.lam) / np.asarray(self.mbar)))


def sliding_variable(e, e_dot, phi) -> np.ndarray:
    """``s = e_dot + Phi e`` with ``Phi`` given by its diagonal (or as a matrix)."""
    e = np.asarray(e, dtype=np.float64)
    e_dot = np.asarray(e_dot, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    if e.shape != e_dot.shape:
        raise ValueError("e and e_dot must have the same shape")
    if phi.ndim == 2:
        if phi.shape != (e.shape[-1], e.shape[-1]):
            raise ValueError("Phi shape mismatch")
        return e_dot + np.einsum("ij,...j->...i", phi, e)
    if phi.shape[-1] != e.shape[-1]:
        raise ValueError("Phi shape mismatch")
    return e_dot + phi * e


def switching_direction(s, eps_bl: float, smooth: bool = True) -> np.ndarray:
    """Boundary-layer saturation of ``s/eps_bl`` (unit vector once ``||s|| >= eps_bl``).

    With ``smooth=False`` the raw ``s/||s||`` is returned (zero at ``s = 0``).
    """
    s = np.asarray(s, dtype=np.float64)
    norm = np.linalg.norm(s, axis=-1, keepdims=True)
    if smooth:
        return s / np.maximum(eps_bl, norm)
    return np.divide(s, norm, out=np.zeros_like(s), where=norm > 0)


def control_input(chi_dd_desired, e_dot, s, r_adapted, sigma_hat, gains: ControllerGains) -> np.ndarray:
    """``tau = Mbar (chi_dd_d - Phi e_dot) - Lambda s + r_hat - sigma_hat * sat(s)``."""
    phi, lam, mbar = gains.arrays()
    tau = mbar * (np.asarray(chi_dd_desired) - phi * np.asarray(e_dot)) - lam * np.asarray(s)
    tau = tau + np.asarray(r_adapted)
    if gains.switching:
        sig = np.asarray(sigma_hat, dtype=np.float64)
        tau = tau - sig[..., None] * switching_direction(s, gains.eps_bl, gains.smooth_switching)
    return tau


def adaptive_gain_step(sigma_hat, s, nu: float, dt: float, floor: float = 1e-6):
    """Forward-Euler step of ``sigma_hat' = ||s|| - nu sigma_hat``, clamped at ``floor``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    sig = np.asarray(sigma_hat, dtype=np.float64)
    if np.any(sig <= 0):
        raise ValueError("sigma_hat must be positive")
    out = sig + dt * (np.linalg.norm(np.asarray(s), axis=-1) - nu * sig)
    return np.maximum(out, floor)
