"""History buffer of model inputs and per-channel normalization."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Normalizer:
    """Frozen z-score statistics for input channels and residual targets."""

    in_mean: np.ndarray
    in_std: np.ndarray
    out_mean: np.ndarray
    out_std: np.ndarray

    @classmethod
    def identity(cls, d_v: int, n: int) -> "Normalizer":
        return cls(np.zeros(d_v), np.ones(d_v), np.zeros(n), np.ones(n))

    @classmethod
    def fit(cls, inputs: np.ndarray, targets: np.ndarray, floor: float = 1e-6) -> "Normalizer":
        """Statistics over rows of ``inputs (T, d_v)`` and ``targets (T, n)``."""
        return cls(inputs.mean(0), np.maximum(inputs.std(0), floor),
                   targets.mean(0), np.maximum(targets.std(0), floor))

    def inputs(self, x):
        return (x - self.in_mean) / self.in_std

    def targets(self, r):
        return (r - self.out_mean) / self.out_std

    def denormalize(self, r_norm):
        return r_norm * self.out_std + self.out_mean

    def arrays(self) -> dict[str, np.ndarray]:
        return {"norm.in_mean": self.in_mean, "norm.in_std": self.in_std,
                "norm.out_mean": self.out_mean, "norm.out_std": self.out_std}

    @classmethod
    def from_arrays(cls, a) -> "Normalizer":
        return cls(a["norm.in_mean"], a["norm.in_std"], a["norm.out_mean"], a["norm.out_std"])


class HistoryWindow:
    """The last ``capacity`` input vectors ``x_t = (chi, chi_dot, tau_prev)``.

    Stores raw (unnormalized) values, oldest first.  A leading batch shape may
    be given to hold one window per simulation instance.
    """

    def __init__(self, capacity: int, d_v: int, batch_shape: tuple[int, ...] = ()):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.d_v = d_v
        self.batch_shape = tuple(batch_shape)
        self._buf = np.zeros(self.batch_shape + (capacity, d_v))
        self.count = 0

    def __len__(self) -> int:
        return min(self.count, self.capacity)

    @property
    def full(self) -> bool:
        return self.count >= self.capacity

    def append(self, x) -> None:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.batch_shape + (self.d_v,):
            raise ValueError(f"expected sample shape {self.batch_shape + (self.d_v,)}, got {x.shape}")
        self._buf[..., :-1, :] = self._buf[..., 1:, :]
        self._buf[..., -1, :] = x
        self.count += 1

    def extend(self, xs) -> None:
        for x in np.asarray(xs, dtype=np.float64):
            self.append(x)

    def push(self, chi, chi_dot, tau_prev) -> None:
        self.append(np.concatenate([chi, chi_dot, tau_prev], axis=-1))

    def last(self, m: int) -> np.ndarray:
        """The newest ``m`` samples, shape ``(..., m, d_v)``; needs ``m`` samples present."""
        if m > self.capacity:
            raise ValueError(f"window holds at most {self.capacity} samples")
        if self.count < m:
            raise ValueError(f"window underfilled: {self.count} of {m} samples")
        return self._buf[..., self.capacity - m:, :].copy()

    def clear(self) -> None:
        self._buf[...] = 0.0
        self.count = 0


def sliding_windows(inputs: np.ndarray, residuals: np.ndarray, T_l: int, k: int, stride: int = 1):
    """All ``(history, targets)`` pairs from one contiguous episode.

    ``history[i] = inputs[t-T_l+1 : t+1]`` and ``targets[i] = residuals[t : t+k+1]``
    for every ``t`` with a full history and a full horizon.
    """
    T = inputs.shape[0]
    ends = np.arange(T_l - 1, T - k, stride)
    if ends.size == 0:
        raise ValueError(f"episode of {T} samples too short for T_l={T_l}, k={k}")
    hist = np.lib.stride_tricks.sliding_window_view(inputs, T_l, axis=0)  # (T-T_l+1, d_v, T_l)
    tgt = np.lib.stride_tricks.sliding_window_view(residuals, k + 1, axis=0)  # (T-k, n, k+1)
    H = np.ascontiguousarray(np.swapaxes(hist[ends - (T_l - 1)], 1, 2))
    Y = np.ascontiguousarray(np.swapaxes(tgt[ends], 1, 2))
    return H, Y
