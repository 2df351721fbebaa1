"""Training data: PID-tracked randomized excitation flights per payload condition."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..controller.loop import run_closed_loop
from ..sim.dataset import ResidualLog, plant_to_dict, read_csv, read_json, write_csv, write_json
from ..sim.disturbance import PayloadSchedule
from ..sim.trajectory import reference_trajectory
from .config import ExperimentConfig

SPLITS = ("train", "val", "test")


def episode_seed(master: int, condition: int, episode: int) -> int:
    return int(np.random.SeedSequence([master, condition, episode]).generate_state(1)[0])


def generate_dataset(cfg: ExperimentConfig) -> dict[float, list[ResidualLog]]:
    """Episodes per payload mass; each episode is an independent noise seed and excitation."""
    dc = cfg.data
    gains = cfg.controller_gains()
    loop = cfg.loop_config(mode="pid", pre_roll=dc.pre_roll)
    out = {}
    for ci, mass in enumerate(dc.payloads):
        seeds = [episode_seed(cfg.seed, ci, i) for i in range(dc.episodes_per_payload)]
        rng = np.random.default_rng([cfg.seed, ci])  # excitation speeds
        speeds = rng.uniform(*dc.speed_range, size=len(seeds))
        trajs = [reference_trajectory("randomized_excitation", float(v), dc.episode_duration, seed=s,
                                      n_arm=cfg.plant_model().n_arm, ramp=1.0) for s, v in zip(seeds, speeds)]
        plant = cfg.plant_model(PayloadSchedule.constant(mass))
        log = run_closed_loop(plant, trajs, dc.episode_duration, seeds, gains, loop, pid=cfg.pid_gains())
        out[float(mass)] = log.residual_logs()
    return out


def split_of(index: int, split: tuple[int, int, int]) -> str:
    """Contiguous assignment of episode ``index``: first train, then val, then test."""
    if index < split[0]:
        return "train"
    return "val" if index < split[0] + split[1] else "test"


def write_dataset(root, dataset: dict[float, list[ResidualLog]], cfg: ExperimentConfig) -> list[Path]:
    root = Path(root)
    files, episodes = [], []
    for mass, logs in dataset.items():
        for i, log in enumerate(logs):
            rel = f"payload_{mass:.3f}/episode_{i:03d}.csv"
            write_csv(root / rel, log)
            files.append(root / rel)
            episodes.append({"file": rel, "payload": mass, "index": i, "split": split_of(i, cfg.data.split),
                             "samples": len(log)})
    meta = {"n": cfg.plant_model().n, "mbar": list(cfg.controller_gains().mbar), "rate_hz": cfg.loop_config().control_rate,
            "seed": cfg.seed, "plant": plant_to_dict(cfg.plant_model()), "episodes": episodes}
    write_json(root / "dataset.json", meta)
    files.append(root / "dataset.json")
    return files


def load_dataset(root) -> tuple[dict[str, list[ResidualLog]], dict]:
    """Episodes grouped by split, plus the metadata sidecar."""
    root = Path(root)
    meta_path = root / "dataset.json"
    if not meta_path.is_file():
        raise FileNotFoundError(f"no dataset at {root} (missing dataset.json); run generate-data first")
    meta = read_json(meta_path)
    groups = {s: [] for s in SPLITS}
    for ep in meta["episodes"]:
        groups[ep["split"]].append(read_csv(root / ep["file"]))
    return groups, meta
