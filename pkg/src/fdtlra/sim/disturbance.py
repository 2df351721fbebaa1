"""Payload schedules and the colored-noise disturbance process."""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class PayloadSchedule:
    """Piecewise-constant payload mass: ``(time_s, mass_kg)`` step events.

    The mass before the first event is ``initial``.
    """

    events: tuple[tuple[float, float], ...] = ()
    initial: float = 0.0

    def __post_init__(self):
        times = [t for t, _ in self.events]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("payload event times must be strictly increasing")
        if self.initial < 0 or any(m < 0 for _, m in self.events):
            raise ValueError("payload masses must be non-negative")
        object.__setattr__(self, "events", tuple((float(t), float(m)) for t, m in self.events))
        object.__setattr__(self, "_times", [t for t, _ in self.events])

    @classmethod
    def constant(cls, mass: float) -> "PayloadSchedule":
        return cls((), float(mass))

    def mass_at(self, t: float) -> float:
        i = bisect.bisect_right(self._times, t)
        return self.initial if i == 0 else self.events[i - 1][1]

    def max_mass(self) -> float:
        return max([self.initial, *(m for _, m in self.events)])


def _seed_streams(seed: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2)]


@dataclass
class NoiseState:
    """Generator state for one simulation instance or a batch of them.

    ``eta`` holds the filtered (colored) component, shape ``(n,)`` or
    ``(B, n)``.  Each batch member owns independent generators for the
    disturbance and for velocity-sensor noise, so results do not depend on
    how runs are grouped into batches.
    """

    seeds: tuple[int, ...]
    eta: np.ndarray
    batched: bool
    _dist: list = field(default_factory=list, repr=False)
    _sensor: list = field(default_factory=list, repr=False)

    @classmethod
    def from_seed(cls, seed: int | Sequence[int], n: int, amplitude=None) -> "NoiseState":
        batched = not np.isscalar(seed)
        seeds = tuple(int(s) for s in (seed if batched else [seed]))
        dist, sensor = [], []
        for s in seeds:
            a, b = _seed_streams(s)
            dist.append(a)
            sensor.append(b)
        amp = np.zeros(n) if amplitude is None else np.asarray(amplitude, dtype=np.float64)
        # start in the stationary distribution
        eta = np.stack([g.standard_normal(n) for g in dist]) * amp / np.sqrt(2.0)
        return cls(seeds, eta if batched else eta[0], batched, dist, sensor)

    def _draw(self, gens: list, n: int, count: int | None) -> np.ndarray:
        shape = n if count is None else (count, n)
        w = np.stack([g.standard_normal(shape) for g in gens])
        return w if self.batched else w[0]

    def white(self, n: int, count: int | None = None) -> np.ndarray:
        """Unit white-noise samples for the disturbance filter."""
        return self._draw(self._dist, n, count)

    def sensor(self, n: int) -> np.ndarray:
        return self._draw(self._sensor, n, None)

    def copy(self) -> "NoiseState":
        import copy
        return copy.deepcopy(self)


def advance_noise(model, noise: NoiseState, dt: float) -> None:
    """One exact update of the first-order low-pass (Ornstein-Uhlenbeck) filter.

    The stationary standard deviation of each channel is ``amplitude/sqrt(2)``.
    """
    rho = np.exp(-2.0 * np.pi * model.noise_bandwidth * dt)
    amp = np.asarray(model.noise_amplitude) / np.sqrt(2.0)
    w = noise.white(model.n)
    noise.eta = rho * noise.eta + np.sqrt(1.0 - rho * rho) * amp * w


def disturbance(model, chi_dot, t: float, noise: NoiseState) -> np.ndarray:
    """Generalized disturbance ``d`` as it enters ``M chi_ddot + C chi_dot + g + d = tau``.

    Linear drag (``+drag * chi_dot`` here, i.e. a force opposing motion) plus
    the current colored-noise sample.  ``t`` is accepted for interface
    symmetry; the time dependence lives in ``noise``.
    """
    chi_dot = np.asarray(chi_dot, dtype=np.float64)
    return np.asarray(model.drag) * chi_dot + noise.eta
