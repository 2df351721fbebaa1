"""Planar floating-base aerial manipulator: inertia, Coriolis and gravity terms.

Generalized coordinates are ``chi = (x, z, theta, q_1, ..., q_N)``: base
position in the vertical plane, base pitch, and relative joint angles of an
N-link serial arm mounted ``mount_offset`` below the base centre.  Every
segment direction uses ``a(phi) = (sin phi, -cos phi)``, so ``q = 0`` with a
level base leaves the arm hanging straight down.

All functions accept leading batch dimensions on ``chi`` / ``chi_dot``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .disturbance import PayloadSchedule

N_BASE = 3


@dataclass(frozen=True)
class PlantModel:
    base_mass: float = 2.5
    base_inertia: float = 0.03
    mount_offset: float = 0.08
    link_masses: tuple[float, ...] = (0.25, 0.2)
    link_lengths: tuple[float, ...] = (0.18, 0.18)
    link_com: tuple[float, ...] = (0.5, 0.5)
    link_inertias: tuple[float, ...] | None = None
    joint_armature: tuple[float, ...] = (0.04, 0.04)
    gravity: float = 9.81
    # generalized viscous damping, N*s/m (translation) and N*m*s/rad (rotation)
    drag: tuple[float, ...] = (0.25, 0.25, 0.005, 0.002, 0.002)
    # colored disturbance: peak amplitude (RMS = amplitude/sqrt(2)) and corner frequency
    noise_amplitude: tuple[float, ...] = (1.2, 1.2, 0.02, 0.01, 0.01)
    noise_bandwidth: float = 0.4
    # additive Gaussian noise on measured chi_dot
    velocity_noise_std: tuple[float, ...] = (0.01, 0.01, 0.005, 0.005, 0.005)
    payload: PayloadSchedule = field(default_factory=PayloadSchedule)

    def __post_init__(self):
        n_arm = len(self.link_masses)
        if n_arm < 1:
            raise ValueError("the arm needs at least one link")
        for name in ("link_lengths", "link_com", "joint_armature"):
            if len(getattr(self, name)) != n_arm:
                raise ValueError(f"{name} must have {n_arm} entries")
        if self.link_inertias is not None and len(self.link_inertias) != n_arm:
            raise ValueError(f"link_inertias must have {n_arm} entries")
        positive = [self.base_mass, self.base_inertia, self.mount_offset, self.gravity,
                    *self.link_masses, *self.link_lengths, *self.inertias]
        if min(positive) <= 0:
            raise ValueError("masses, lengths, inertias and gravity must be strictly positive")
        if any(a < 0 for a in self.joint_armature):
            raise ValueError("joint armature must be non-negative")
        if not all(0 < c <= 1 for c in self.link_com):
            raise ValueError("link_com fractions must lie in (0, 1]")
        n = N_BASE + n_arm
        for name in ("drag", "noise_amplitude", "velocity_noise_std"):
            v = getattr(self, name)
            if len(v) != n or min(v) < 0:
                raise ValueError(f"{name} needs {n} non-negative entries")
        if self.noise_bandwidth <= 0:
            raise ValueError("noise_bandwidth must be positive")

    @property
    def n_arm(self) -> int:
        return len(self.link_masses)

    @property
    def n(self) -> int:
        return N_BASE + self.n_arm

    @property
    def inertias(self) -> tuple[float, ...]:
        if self.link_inertias is not None:
            return tuple(self.link_inertias)
        # uniform rods about their centre
        return tuple(m * l * l / 12.0 for m, l in zip(self.link_masses, self.link_lengths))

    def fixed_mass(self) -> float:
        return self.base_mass + float(sum(self.link_masses))

    @cached_property
    def _geometry(self):
        n_arm = self.n_arm
        n_seg = n_arm + 1  # mount segment + links
        n_ang = n_arm + 1  # theta + joints
        D = np.zeros((n_seg, n_ang))
        D[0, 0] = 1.0
        for s in range(1, n_seg):
            D[s, : s + 1] = 1.0
        # points: link COMs then the end effector
        L = np.zeros((n_arm + 1, n_seg))
        for i in range(n_arm):
            L[i, 0] = self.mount_offset
            L[i, 1:i + 1] = self.link_lengths[:i]
            L[i, i + 1] = self.link_com[i] * self.link_lengths[i]
        L[n_arm, 0] = self.mount_offset
        L[n_arm, 1:] = self.link_lengths
        LD = L[:, :, None] * D[None, :, :]
        LDD = LD[:, :, :, None] * D[None, :, None, :]
        rot = np.zeros((n_ang, n_ang))
        rot[0, 0] = self.base_inertia
        for i, I in enumerate(self.inertias):
            rot += I * np.outer(D[i + 1], D[i + 1])
        rot[1:, 1:] += np.diag(self.joint_armature)
        return L, D, LD, LDD, rot


def _check(model: PlantModel, *vecs) -> None:
    for v in vecs:
        if np.shape(v)[-1] != model.n:
            raise ValueError(f"expected vectors of length n={model.n}, got shape {np.shape(v)}")


def _segment_angles(model: PlantModel, chi: np.ndarray) -> np.ndarray:
    theta = chi[..., 2:3]
    return np.concatenate([theta, theta + np.cumsum(chi[..., N_BASE:], axis=-1)], axis=-1)


def _point_masses(model: PlantModel, payload_mass: float) -> np.ndarray:
    return np.array([*model.link_masses, float(payload_mass)])


def _jacobians(model: PlantModel, chi: np.ndarray, derivative: bool = False):
    """Angular-coordinate Jacobians of every point: ``(..., P, 2, n_ang)``."""
    L, D, LD, LDD, _ = model._geometry
    phi = _segment_angles(model, chi)
    s, c = np.sin(phi), np.cos(phi)
    A = np.stack([s, -c], axis=-1)   # a(phi)
    B = np.stack([c, s], axis=-1)    # da/dphi
    J = np.einsum("psk,...sc->...pck", LD, B)
    if not derivative:
        return J, A
    dJ = -np.einsum("pskm,...sc->...pckm", LDD, A)
    return J, A, dJ


def mass_matrix(model: PlantModel, chi, payload_mass: float | None = None, t: float = 0.0) -> np.ndarray:
    """Inertia matrix ``M(chi)``; payload mass defaults to the schedule value at ``t``."""
    chi = np.asarray(chi, dtype=np.float64)
    _check(model, chi)
    mp = model.payload.mass_at(t) if payload_mass is None else payload_mass
    m = _point_masses(model, mp)
    J, _ = _jacobians(model, chi)
    rot = model._geometry[4]
    n = model.n
    M = np.zeros(chi.shape[:-1] + (n, n))
    m_tot = model.fixed_mass() + mp
    M[..., 0, 0] = m_tot
    M[..., 1, 1] = m_tot
    cross = np.einsum("p,...pck->...ck", m, J)
    M[..., 0:2, 2:] = cross
    M[..., 2:, 0:2] = np.swapaxes(cross, -1, -2)
    M[..., 2:, 2:] = np.einsum("p,...pck,...pcl->...kl", m, J, J) + rot
    return M


def mass_matrix_derivatives(model: PlantModel, chi, payload_mass: float | None = None,
                            t: float = 0.0) -> np.ndarray:
    """``dM[..., i, j, k] = dM_ij / dchi_k``."""
    chi = np.asarray(chi, dtype=np.float64)
    _check(model, chi)
    mp = model.payload.mass_at(t) if payload_mass is None else payload_mass
    m = _point_masses(model, mp)
    J, _, dJ = _jacobians(model, chi, derivative=True)
    n = model.n
    dM = np.zeros(chi.shape[:-1] + (n, n, n))
    cross = np.einsum("p,...pckm->...ckm", m, dJ)
    dM[..., 0:2, 2:, 2:] = cross
    dM[..., 2:, 0:2, 2:] = np.swapaxes(cross, -2, -3)
    t1 = np.einsum("p,...pckm,...pcl->...klm", m, dJ, J)
    dM[..., 2:, 2:, 2:] = t1 + np.swapaxes(t1, -2, -3)
    return dM


def coriolis_matrix(model: PlantModel, chi, chi_dot, payload_mass: float | None = None,
                    t: float = 0.0) -> np.ndarray:
    """Christoffel-symbol Coriolis matrix, so ``dM/dt - 2C`` is skew-symmetric."""
    chi_dot = np.asarray(chi_dot, dtype=np.float64)
    _check(model, chi_dot)
    dM = mass_matrix_derivatives(model, chi, payload_mass, t)
    # Gamma_ijk = 0.5 (dM_ij/dk + dM_ik/dj - dM_jk/di)
    gamma = 0.5 * (dM + np.swapaxes(dM, -1, -2) - np.moveaxis(dM, -1, -3))
    return np.einsum("...ijk,...k->...ij", gamma, chi_dot)


def gravity_vector(model: PlantModel, chi, payload_mass: float | None = None, t: float = 0.0) -> np.ndarray:
    """Gradient of the potential energy."""
    chi = np.asarray(chi, dtype=np.float64)
    _check(model, chi)
    mp = model.payload.mass_at(t) if payload_mass is None else payload_mass
    m = _point_masses(model, mp)
    J, _ = _jacobians(model, chi)
    g = np.zeros(chi.shape)
    g[..., 1] = model.gravity * (model.fixed_mass() + mp)
    g[..., 2:] = model.gravity * np.einsum("p,...pk->...k", m, J[..., :, 1, :])
    return g


def potential_energy(model: PlantModel, chi, payload_mass: float | None = None, t: float = 0.0):
    chi = np.asarray(chi, dtype=np.float64)
    _check(model, chi)
    mp = model.payload.mass_at(t) if payload_mass is None else payload_mass
    m = _point_masses(model, mp)
    L = model._geometry[0]
    phi = _segment_angles(model, chi)
    heights = np.einsum("ps,...s->...p", L, -np.cos(phi))
    return model.gravity * ((model.fixed_mass() + mp) * chi[..., 1] + np.einsum("p,...p->...", m, heights))


def kinetic_energy(model: PlantModel, chi, chi_dot, payload_mass: float | None = None, t: float = 0.0):
    M = mass_matrix(model, chi, payload_mass, t)
    v = np.asarray(chi_dot, dtype=np.float64)
    return 0.5 * np.einsum("...i,...ij,...j->...", v, M, v)


def end_effector(model: PlantModel, chi) -> np.ndarray:
    """End-effector position ``(..., 2)`` in the vertical plane."""
    chi = np.asarray(chi, dtype=np.float64)
    L = model._geometry[0]
    phi = _segment_angles(model, chi)
    A = np.stack([np.sin(phi), -np.cos(phi)], axis=-1)
    return chi[..., 0:2] + np.einsum("s,...sc->...c", L[-1], A)


def end_effector_jacobian(model: PlantModel, chi) -> np.ndarray:
    """Full ``(..., 2, n)`` Jacobian of the end-effector position."""
    chi = np.asarray(chi, dtype=np.float64)
    J, _ = _jacobians(model, chi)
    out = np.zeros(chi.shape[:-1] + (2, model.n))
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = 1.0
    out[..., :, 2:] = J[..., -1, :, :]
    return out
