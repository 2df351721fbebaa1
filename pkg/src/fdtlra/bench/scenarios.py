"""Flight scenarios: pick-and-place along an S-curve (A) and a carried figure-8 (B)."""
from __future__ import annotations

import dataclasses

import numpy as np

from ..sim.disturbance import PayloadSchedule
from ..sim.plant import PlantModel
from ..sim.trajectory import ReferenceTrajectory, reference_trajectory

KIND = {"A": "s_shape", "B": "figure8"}


def phase_crossings(traj: ReferenceTrajectory, duration: float, step: float = np.pi,
                    resolution: float = 1e-4) -> list[tuple[float, int]]:
    """Times in ``(0, duration]`` at which the cycle phase crosses ``j * step``, with ``j``."""
    t = np.arange(0.0, duration + resolution, resolution)
    j = np.floor(traj.phase(t)[0] / step + 1e-9).astype(int)
    idx = np.nonzero(np.diff(j) > 0)[0] + 1
    return [(round(float(t[i]), 6), int(j[i])) for i in idx]


def pick_place_schedule(traj: ReferenceTrajectory, payload: float, duration: float) -> PayloadSchedule:
    """Carried on the outbound leg (box to table), released at the table and
    picked up again at the box: one release and one grasp per cycle."""
    events = [(t, 0.0 if j % 2 else payload) for t, j in phase_crossings(traj, duration)]
    return PayloadSchedule(tuple(events), payload)


def build_scenario(name: str, base: PlantModel, payload: float, speed: float, duration: float,
                   ramp: float = 1.0):
    """``(plant, trajectory)`` for one grid cell."""
    if name not in KIND:
        raise ValueError(f"unknown scenario {name!r}; expected one of {sorted(KIND)}")
    traj = reference_trajectory(KIND[name], speed, duration, n_arm=base.n_arm, ramp=ramp)
    if name == "A":
        schedule = pick_place_schedule(traj, payload, duration)
    else:
        schedule = PayloadSchedule.constant(payload)
    return dataclasses.replace(base, payload=schedule), traj
