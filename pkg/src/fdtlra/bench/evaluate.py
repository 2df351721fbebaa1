"""Open-loop residual prediction on logged flights, with and without online adaptation."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..controller.loop import ClosedLoopLog, run_closed_loop
from ..fdt.model import FdtModel
from ..lra.adapter import AdapterConfig, AdapterState, adapt_predict, maybe_reset, rls_update
from .config import ExperimentConfig
from .metrics import MetricsReport, r2_score, rmse
from .scenarios import build_scenario


@dataclass
class StreamPrediction:
    """Per-tick predictions on a batch of streams, shapes ``(B, N, n)``.

    ``adapted`` is formed before the adapter sees the residual it is scored
    against, i.e. with the weights of the previous tick.
    """

    t: np.ndarray
    target: np.ndarray
    base: np.ndarray
    adapted: np.ndarray
    alpha: np.ndarray | None
    resets: np.ndarray
    infer_ms: np.ndarray   # wall time per batched forward call, per tick

    @property
    def n_seeds(self) -> int:
        return self.target.shape[0]


def stream_inputs(log: ClosedLoopLog) -> tuple[np.ndarray, np.ndarray]:
    """Model inputs ``(chi, chi_dot, tau_prev)`` and measured residuals, ``(B, T, .)``."""
    return np.concatenate([log.chi, log.chi_dot, log.tau_prev], axis=-1), log.r


def predict_stream(model: FdtModel, inputs, residuals, adapter: AdapterConfig | None = None,
                   t=None, chunk: int = 32) -> StreamPrediction:
    """Run the frozen model at every tick with a full window, then the adapter in causal order."""
    X = np.asarray(inputs, dtype=np.float64)
    R = np.asarray(residuals, dtype=np.float64)
    if X.ndim == 2:
        X, R = X[None], R[None]
    B, T, d_v = X.shape
    Tl = model.cfg.T_l
    if T < Tl:
        raise ValueError(f"stream shorter than the history length ({T} < {Tl})")
    idx = np.arange(Tl - 1, T)
    N, n = idx.size, model.cfg.n
    base = np.zeros((B, N, n))
    latent = np.zeros((B, N, model.latent_dim))
    alpha = None
    infer = np.zeros(N)
    for c in range(0, N, chunk):
        ii = idx[c:c + chunk]
        H = np.stack([X[:, i - Tl + 1:i + 1] for i in ii], axis=1).reshape(-1, Tl, d_v)
        t0 = time.perf_counter()
        fc = model.predict_history(H)
        infer[c:c + len(ii)] = 1e3 * (time.perf_counter() - t0) / len(ii)
        base[:, c:c + len(ii)] = fc.one_step.reshape(B, len(ii), n)
        latent[:, c:c + len(ii)] = fc.latent.reshape(B, len(ii), -1)
        if fc.alpha is not None:
            if alpha is None:
                alpha = np.zeros((B, N) + fc.alpha.shape[1:])
            alpha[:, c:c + len(ii)] = fc.alpha.reshape((B, len(ii)) + fc.alpha.shape[1:])
    target = R[:, idx]
    adapted = base.copy()
    resets = np.zeros((B, N), dtype=bool)
    if adapter is not None:
        state = AdapterState.initial(model.latent_dim, n, adapter, (B,))
        for j in range(N):
            adapted[:, j] = adapt_predict(base[:, j], latent[:, j], state)
            rls_update(state, latent[:, j], target[:, j], base[:, j], adapter)
            _, resets[:, j] = maybe_reset(state, adapter)
    tt = np.arange(N, dtype=np.float64) if t is None else np.asarray(t)[idx]
    return StreamPrediction(tt, target, base, adapted, alpha, resets, infer)


def evaluation_stream(cfg: ExperimentConfig, scenario: str, payload: float, speed: float,
                      duration: float) -> ClosedLoopLog:
    """PID-tracked flight (independent of any learned model), one member per seed."""
    plant, traj = build_scenario(scenario, cfg.plant_model(), payload, speed, duration, cfg.scenarios.ramp)
    Tl = cfg.fdt_config().T_l
    pre_roll = (Tl + 10) / cfg.loop_config().control_rate  # window already full at t = 0
    return run_closed_loop(plant, traj, duration, list(cfg.seeds), cfg.controller_gains(),
                           cfg.loop_config(mode="pid", pre_roll=pre_roll), pid=cfg.pid_gains())


def prediction_metrics(pred: StreamPrediction, report: MetricsReport, experiment: str,
                       method: str, which: str = "base", **cond) -> None:
    p = pred.base if which == "base" else pred.adapted
    report.add(experiment, method, "rmse", rmse(p, pred.target, axis=(1, 2)), **cond)
    report.add(experiment, method, "r2", r2_score(p, pred.target), **cond)


def timing_row(method: str, pred: StreamPrediction) -> dict:
    """Mean and max inference time per sample; kept apart from the metrics (hardware-dependent)."""
    return {"method": method, "inference_ms_mean": float(np.mean(pred.infer_ms)),
            "inference_ms_max": float(np.max(pred.infer_ms))}


def predict_log(model: FdtModel, log: ClosedLoopLog, adapter: AdapterConfig | None = None) -> StreamPrediction:
    """:func:`predict_stream` on a flight log, scored on the part at ``t >= 0``.

    The adapter already runs over the pre-roll ticks that have a full window.
    """
    X, R = stream_inputs(log)
    pred = predict_stream(model, X, R, adapter, t=log.t)
    keep = pred.t >= 0
    alpha = None if pred.alpha is None else pred.alpha[:, keep]
    return StreamPrediction(pred.t[keep], pred.target[:, keep], pred.base[:, keep], pred.adapted[:, keep],
                            alpha, pred.resets[:, keep], pred.infer_ms[keep])
