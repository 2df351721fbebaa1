"""Online linear correction of a frozen one-step forecast by recursive least squares.

The adapter models ``r = base + W^T g + noise`` with ``g`` the frozen latent
vector and identifies ``W`` with exponentially weighted RLS.  One gain vector
is shared by all output channels (common regressor).  A covariance reset
restores plasticity when the smoothed innovation grows.

All functions accept a leading batch shape so one call can serve a batch of
independent simulations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AdapterConfig:
    lam: float = 0.99
    sigma0: float = 1.0
    delta_thresh: float = 3.2
    alpha_ema: float = 0.9
    reset_enabled: bool = True
    reset_decay: float = 0.5       # factor applied to the innovation EMA after a reset
    trace_cap: float | None = None  # optional bound on trace(Sigma) against covariance windup

    def __post_init__(self):
        if not 0 < self.lam <= 1:
            raise ValueError("lam must lie in (0, 1]")
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be positive")
        if self.delta_thresh < 0:
            raise ValueError("delta_thresh must be non-negative")
        if not 0 <= self.alpha_ema < 1:
            raise ValueError("alpha_ema must lie in [0, 1)")
        if not 0 <= self.reset_decay <= 1:
            raise ValueError("reset_decay must lie in [0, 1]")
        if self.trace_cap is not None and self.trace_cap <= 0:
            raise ValueError("trace_cap must be positive")


@dataclass
class AdapterState:
    W: np.ndarray          # (..., d_k, n)
    Sigma: np.ndarray      # (..., d_k, d_k)
    eps_ema: np.ndarray    # (..., n)
    steps: int = 0
    resets: np.ndarray | int = 0

    @classmethod
    def initial(cls, d_k: int, n: int, cfg: AdapterConfig = AdapterConfig(),
                batch_shape: tuple[int, ...] = ()) -> "AdapterState":
        Sigma = np.broadcast_to(cfg.sigma0 * np.eye(d_k), batch_shape + (d_k, d_k)).copy()
        resets = np.zeros(batch_shape, dtype=np.int64) if batch_shape else 0
        return cls(np.zeros(batch_shape + (d_k, n)), Sigma, np.zeros(batch_shape + (n,)), 0, resets)

    @property
    def d_k(self) -> int:
        return self.W.shape[-2]

    @property
    def n(self) -> int:
        return self.W.shape[-1]

    def copy(self) -> "AdapterState":
        r = self.resets.copy() if isinstance(self.resets, np.ndarray) else self.resets
        return AdapterState(self.W.copy(), self.Sigma.copy(), self.eps_ema.copy(), self.steps, r)


def adapt_predict(base, g_prime, state: AdapterState) -> np.ndarray:
    """``base + W^T g'``."""
    base = np.asarray(base, dtype=np.float64)
    g = np.asarray(g_prime, dtype=np.float64)
    if g.shape[-1] != state.d_k or base.shape[-1] != state.n:
        raise ValueError(f"expected g' width {state.d_k} and base width {state.n}")
    return base + np.einsum("...kn,...k->...n", state.W, g)


def rls_update(state: AdapterState, g_prime, r_measured, base, cfg: AdapterConfig):
    """One RLS step; mutates and returns ``state`` together with the innovation.

    The innovation uses the weights from before the update (a priori error).
    """
    g = np.asarray(g_prime, dtype=np.float64)
    r = np.asarray(r_measured, dtype=np.float64)
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(r)) and np.all(np.isfinite(base))):
        raise FloatingPointError("non-finite input to the adapter update")
    eps = r - adapt_predict(base, g, state)
    Sg = np.einsum("...ij,...j->...i", state.Sigma, g)
    denom = cfg.lam + np.einsum("...i,...i->...", g, Sg)
    K = Sg / denom[..., None]
    state.W += K[..., :, None] * eps[..., None, :]
    S = (state.Sigma - K[..., :, None] * Sg[..., None, :]) / cfg.lam
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    if cfg.trace_cap is not None:
        tr = np.trace(S, axis1=-2, axis2=-1)
        scale = np.where(tr > cfg.trace_cap, cfg.trace_cap / tr, 1.0)
        S = S * scale[..., None, None]
    state.Sigma = S
    state.eps_ema = cfg.alpha_ema * state.eps_ema + (1.0 - cfg.alpha_ema) * eps
    state.steps += 1
    return state, eps


def maybe_reset(state: AdapterState, cfg: AdapterConfig):
    """Reinitialize ``Sigma`` where ``||eps_ema|| > delta_thresh`` (strict).

    ``W`` is kept; the innovation EMA is scaled by ``reset_decay`` so the
    trigger does not fire again immediately.  Returns ``(state, did_reset)``.
    """
    norm = np.linalg.norm(state.eps_ema, axis=-1)
    fire = (norm > cfg.delta_thresh) & cfg.reset_enabled
    if np.any(fire):
        eye = cfg.sigma0 * np.eye(state.d_k)
        if np.ndim(fire) == 0:
            state.Sigma = eye.copy()
            state.eps_ema = state.eps_ema * cfg.reset_decay
        else:
            state.Sigma[fire] = eye
            state.eps_ema[fire] *= cfg.reset_decay
        state.resets = state.resets + np.asarray(fire, dtype=np.int64)
    return state, fire


def weighted_objective(history, W, lam: float) -> float:
    """``sum_tau lam^(t-tau) ||r_tau - base_tau - W^T g_tau||^2`` over ``(g, base, r)`` triples."""
    history = list(history)
    if not history:
        return 0.0
    t = len(history) - 1
    total = 0.0
    for i, (g, base, r) in enumerate(history):
        e = np.asarray(r) - np.asarray(base) - np.asarray(W).T @ np.asarray(g)
        total += lam ** (t - i) * float(e @ e)
    return total


def ridge_solution(G, Y, sigma0: float, lam: float = 1.0, W0=None) -> np.ndarray:
    """Minimizer of the weighted objective plus the prior ``||W - W0||^2 / sigma0`` (weighted by ``lam^t``).

    ``G``: ``(T, d_k)`` regressors; ``Y``: ``(T, n)`` targets ``r - base``.
    """
    G = np.asarray(G, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    T, d_k = G.shape
    w = lam ** np.arange(T - 1, -1, -1, dtype=np.float64)
    prior = lam**T / sigma0
    W0 = np.zeros((d_k, Y.shape[1])) if W0 is None else np.asarray(W0)
    A = prior * np.eye(d_k) + (G * w[:, None]).T @ G
    b = prior * W0 + (G * w[:, None]).T @ Y
    return np.linalg.solve(A, b)


TRACE_COLUMNS = ("t", "eps_norm", "eps_ema_norm", "reset", "trace_sigma", "w_fro")


def trace_row(t: float, state: AdapterState, eps, did_reset) -> tuple:
    """Diagnostics for one update, matching ``TRACE_COLUMNS`` (unbatched state)."""
    return (t, float(np.linalg.norm(eps)), float(np.linalg.norm(state.eps_ema)), int(bool(did_reset)),
            float(np.trace(state.Sigma)), float(np.linalg.norm(state.W)))
