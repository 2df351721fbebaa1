"""Offline training: Adam on the multi-step loss with best-validation early stopping."""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..numerics.optim import ParamStore, adam_step
from ..numerics.tensor import Tape, no_grad
from .config import FdtConfig
from .model import FdtModel, forward_normalized, init_params, multi_step_loss
from .window import Normalizer, sliding_windows


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 256
    epochs: int = 100
    patience: int = 10
    stride: int = 1
    seed: int = 0
    shuffle_labels: bool = False  # control run: targets permuted across windows

    def __post_init__(self):
        if self.lr <= 0 or self.batch_size < 1 or self.epochs < 1 or self.patience < 1 or self.stride < 1:
            raise ValueError("invalid training hyperparameters")


@dataclass
class TrainResult:
    model: FdtModel
    log: list[dict]
    best_epoch: int
    stopped_early: bool
    wall_times: list[float] = field(default_factory=list)

    @property
    def best_val_loss(self) -> float:
        return min(r["val_loss"] for r in self.log)


def episode_arrays(episodes) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """``(inputs, residuals)`` per episode; accepts ResidualLog objects or array pairs."""
    xs, rs = [], []
    for ep in episodes:
        if hasattr(ep, "inputs"):
            xs.append(ep.inputs())
            rs.append(ep.r)
        else:
            x, r = ep
            xs.append(np.asarray(x, dtype=np.float64))
            rs.append(np.asarray(r, dtype=np.float64))
    return xs, rs


def build_windows(xs, rs, cfg: FdtConfig, norm: Normalizer, stride: int = 1):
    H, Y = [], []
    for x, r in zip(xs, rs):
        h, y = sliding_windows(norm.inputs(x), norm.targets(r), cfg.T_l, cfg.k, stride)
        H.append(h)
        Y.append(y)
    return np.concatenate(H), np.concatenate(Y)


def evaluate_loss(params: ParamStore, cfg: FdtConfig, H, Y, chunk: int = 1024) -> float:
    """Mean per-window multi-step loss (normalized units)."""
    total = 0.0
    with no_grad():
        for i in range(0, len(H), chunk):
            out = forward_normalized(H[i:i + chunk], params, cfg)[0]
            total += float(multi_step_loss(out, Y[i:i + chunk]).value)
    return total / len(H)


def train(train_episodes: Sequence, val_episodes: Sequence, cfg: FdtConfig,
          hyper: TrainConfig = TrainConfig(), progress=None) -> TrainResult:
    xs, rs = episode_arrays(train_episodes)
    if not xs or sum(len(x) for x in xs) == 0:
        raise ValueError("empty training dataset")
    vxs, vrs = episode_arrays(val_episodes)
    if not vxs:
        raise ValueError("empty validation dataset")
    for x in xs + vxs:
        if x.shape[1] != cfg.d_v:
            raise ValueError(f"episodes have {x.shape[1]} input channels, config expects {cfg.d_v}")
    norm = Normalizer.fit(np.concatenate(xs), np.concatenate(rs))
    H, Y = build_windows(xs, rs, cfg, norm, hyper.stride)
    Hv, Yv = build_windows(vxs, vrs, cfg, norm, 1)
    rng = np.random.default_rng(hyper.seed)
    if hyper.shuffle_labels:
        Y = Y[rng.permutation(len(Y))]
    params = init_params(cfg, hyper.seed)

    log: list[dict] = []
    walls: list[float] = []
    best, best_epoch, bad = np.inf, 0, 0
    best_arrays = params.arrays()
    stopped = False
    for epoch in range(1, hyper.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(len(H))
        running = 0.0
        for i in range(0, len(order), hyper.batch_size):
            b = order[i:i + hyper.batch_size]
            try:
                with Tape() as tape:
                    out = forward_normalized(H[b], params, cfg)[0]
                    loss = multi_step_loss(out, Y[b]) * (1.0 / len(b))
                tape.backward(loss)
            except FloatingPointError as exc:
                raise FloatingPointError(f"non-finite loss at epoch {epoch}, batch {i // hyper.batch_size}: "
                                         "lower the learning rate or check the data") from exc
            adam_step(params, lr=hyper.lr)
            running += float(loss.value) * len(b)
        val = evaluate_loss(params, cfg, Hv, Yv)
        log.append({"epoch": epoch, "train_loss": running / len(H), "val_loss": val})
        walls.append(time.perf_counter() - t0)
        if progress:
            progress(log[-1])
        if val < best:
            best, best_epoch, bad = val, epoch, 0
            best_arrays = params.arrays()
        else:
            bad += 1
            if bad >= hyper.patience:
                stopped = True
                break
    params.load_arrays(best_arrays)
    return TrainResult(FdtModel(cfg, params, norm), log, best_epoch, stopped, walls)


def write_training_log(path, log: list[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss"])
        for r in log:
            w.writerow([r["epoch"], repr(r["train_loss"]), repr(r["val_loss"])])


def write_wall_times(path, walls: list[float]) -> None:
    """Wall-clock seconds per epoch; kept apart from the deterministic training log."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "wall_s"])
        for i, s in enumerate(walls, 1):
            w.writerow([i, f"{s:.6f}"])
