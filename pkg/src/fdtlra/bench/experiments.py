"""Experiment drivers behind the CLI: training, prediction evaluation, tracking grid, ablations."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..controller.loop import run_closed_loop
from ..fdt.model import FdtModel
from ..fdt.train import TrainResult, train, write_training_log, write_wall_times
from .config import ExperimentConfig
from .evaluate import evaluation_stream, predict_log, prediction_metrics, timing_row
from .metrics import MetricsReport, delta_percent, median_iqr, rmse

def train_variant(cfg: ExperimentConfig, groups: dict, variant: str = "full", out_dir=None,
                  shuffle_labels: bool = False, progress=None) -> TrainResult:
    hyper = cfg.train_config()
    if shuffle_labels:
        from dataclasses import replace
        hyper = replace(hyper, shuffle_labels=True)
    res = train(groups["train"], groups["val"], cfg.fdt_config(variant), hyper, progress)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        tag = variant + ("_shuffled" if shuffle_labels else "")
        res.model.save(out / f"{tag}.ckpt", {"variant": variant, "best_epoch": res.best_epoch,
                                            "stopped_early": res.stopped_early, "seed": hyper.seed})
        write_training_log(out / f"{tag}_training_log.csv", res.log)
        write_wall_times(out / f"{tag}_wall_times.csv", res.wall_times)
    return res


def write_rows(path, rows: list[dict], columns=None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = columns or (list(rows[0]) if rows else [])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})


# -- open-loop prediction --------------------------------------------------

def eval_prediction(cfg: ExperimentConfig, model: FdtModel, out_dir=None) -> MetricsReport:
    ec = cfg.eval
    log = evaluation_stream(cfg, ec.scenario, ec.payload, ec.speed, ec.duration)
    pred = predict_log(model, log, cfg.adapter_config())
    report = MetricsReport()
    cond = {"scenario": ec.scenario, "payload": ec.payload, "speed": ec.speed}
    prediction_metrics(pred, report, "prediction", "fdt", "base", **cond)
    prediction_metrics(pred, report, "prediction", "fdt_lra", "adapted", **cond)
    report.add("prediction", "fdt_lra", "resets", pred.resets.sum(axis=1), **cond)
    if out_dir is not None:
        out = Path(out_dir)
        report.write_csv(out / "metrics.csv")
        write_rows(out / "timing.csv", [timing_row("fdt", pred)])
        if pred.alpha is not None:
            write_alpha_csv(out / "alpha_weights.csv", pred.t, pred.alpha[0])
        write_prediction_csv(out / "predictions_seed0.csv", pred, member=0)
    return report


def write_alpha_csv(path, t, alpha) -> None:
    """Memory attention weights over input channels, one row per tick (rows sum to 1)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    d_v = alpha.shape[-1]
    np.savetxt(path, np.column_stack([t, alpha]), fmt="%.17g", delimiter=",", comments="",
               header=",".join(["t"] + [f"alpha_{i}" for i in range(d_v)]))


def write_prediction_csv(path, pred, member: int = 0) -> None:
    n = pred.target.shape[-1]
    cols = ["t"] + [f"{k}_{i}" for k in ("r", "r_base", "r_adapted") for i in range(n)] + ["reset"]
    data = np.column_stack([pred.t, pred.target[member], pred.base[member], pred.adapted[member],
                            pred.resets[member].astype(float)])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=",".join(cols), comments="")


# -- closed-loop tracking grid ---------------------------------------------

def grid_cells(cfg: ExperimentConfig):
    sc = cfg.scenarios
    for name in sc.names:
        for payload in sc.payloads:
            for speed in sc.speeds:
                yield name, float(payload), float(speed)


def run_cell(cfg: ExperimentConfig, model: FdtModel | None, scenario: str, payload: float, speed: float,
             method: str, seeds=None):
    from .scenarios import build_scenario
    sc = cfg.scenarios
    plant, traj = build_scenario(scenario, cfg.plant_model(), payload, speed, sc.duration, sc.ramp)
    return run_closed_loop(plant, traj, sc.duration, list(seeds if seeds is not None else cfg.seeds),
                           cfg.controller_gains(), cfg.loop_config(mode=method), model=model,
                           adapter=cfg.adapter_config(), pid=cfg.pid_gains(), record_alpha=model is not None)


def run_grid(cfg: ExperimentConfig, model: FdtModel, out_dir=None, cells=None, progress=None):
    """Tracking RMSE per cell and method.  Returns ``(report, per_seed)`` where
    ``per_seed[(scenario, payload, speed, method)]`` holds the per-seed RMSE."""
    report = MetricsReport()
    per_seed = {}
    timing = []
    for scenario, payload, speed in (cells or list(grid_cells(cfg))):
        for method in cfg.scenarios.methods:
            log = run_cell(cfg, model if method in ("fdt", "fdt_lra") else None, scenario, payload, speed, method)
            vals = log.tracking_rmse()
            per_seed[(scenario, payload, speed, method)] = vals
            report.add("tracking", method, "rmse", vals, scenario=scenario, payload=payload, speed=speed)
            report.add_value("tracking", method, "sigma_hat_min", float(log.sigma_hat.min()),
                             scenario=scenario, payload=payload, speed=speed)
            if method == "fdt_lra":
                report.add("tracking", method, "resets", log.reset.sum(axis=1), scenario=scenario,
                           payload=payload, speed=speed)
            timing.append({"scenario": scenario, "payload": payload, "speed": speed, "method": method,
                           "tick_us_mean": float(1e6 * np.mean(log.tick_wall)),
                           "tick_us_max": float(1e6 * np.max(log.tick_wall))})
            if out_dir is not None:
                stem = Path(out_dir) / "logs" / f"{scenario}_m{payload:.2f}_v{speed:.2f}_{method}"
                log.write_csv(Path(str(stem) + ".csv"), members=range(min(cfg.scenarios.log_members,
                                                                             len(log.seeds))))
                if log.alpha is not None and cfg.scenarios.log_members:
                    m = log.active & np.all(np.isfinite(log.alpha[0]), axis=-1)
                    write_alpha_csv(str(stem) + "_alpha.csv", log.t[m], log.alpha[0, m])
            if progress:
                progress(scenario, payload, speed, method, vals)
    if out_dir is not None:
        report.write_csv(Path(out_dir) / "metrics.csv")
        write_rows(Path(out_dir) / "timing.csv", timing)
    return report, per_seed


def grid_orderings(per_seed: dict, methods=("none", "fdt", "fdt_lra")) -> list[dict]:
    """Per-cell method ordering and per-(method, payload) speed monotonicity, on seed medians."""
    med = {k: median_iqr(v)[0] for k, v in per_seed.items()}
    cells = sorted({k[:3] for k in med})
    rows = []
    for sc, m, v in cells:
        vals = [med[(sc, m, v, meth)] for meth in methods]
        rows.append({"check": "method_order", "scenario": sc, "payload": m, "speed": v,
                     "values": vals, "ok": all(a > b for a, b in zip(vals, vals[1:]))})
    for sc, m in sorted({c[:2] for c in cells}):
        speeds = sorted({c[2] for c in cells if c[:2] == (sc, m)})
        for meth in methods:
            vals = [med[(sc, m, v, meth)] for v in speeds]
            rows.append({"check": "speed_monotone", "scenario": sc, "payload": m, "method": meth,
                         "values": vals, "ok": all(b >= a for a, b in zip(vals, vals[1:]))})
    return rows


# -- ablations ---------------------------------------------------------------

def run_ablation(cfg: ExperimentConfig, models: dict[str, FdtModel], out_dir=None) -> MetricsReport:
    """Prediction RMSE of each ablation against the full model (FDT + adapter) on one stream.

    ``no_lra`` is the full forecaster without the adapter; the structural
    variants are retrained forecasters that keep the adapter.
    """
    ac = cfg.ablation
    log = evaluation_stream(cfg, ac.scenario, ac.payload, ac.speed, ac.duration)
    adapter = cfg.adapter_config()
    full = predict_log(models["full"], log, adapter)
    per_seed = {"full": rmse(full.adapted, full.target, axis=(1, 2))}
    timing = [timing_row("full", full)]
    for v in ac.variants:
        if v == "no_lra":
            per_seed[v] = rmse(full.base, full.target, axis=(1, 2))
            continue
        if v not in models:
            raise KeyError(f"no trained model for ablation {v!r}")
        p = predict_log(models[v], log, adapter)
        per_seed[v] = rmse(p.adapted, p.target, axis=(1, 2))
        timing.append(timing_row(v, p))
    report = MetricsReport()
    cond = {"scenario": ac.scenario, "payload": ac.payload, "speed": ac.speed}
    ref = median_iqr(per_seed["full"])[0]
    for v, vals in per_seed.items():
        report.add("ablation", v, "rmse", vals, **cond)
        report.add_value("ablation", v, "delta_rmse_pct", delta_percent(median_iqr(vals)[0], ref), **cond)
        report.add("ablation", v, "paired_delta_pct", 100.0 * (vals / per_seed["full"] - 1.0), **cond)
    if out_dir is not None:
        report.write_csv(Path(out_dir) / "metrics.csv")
        write_rows(Path(out_dir) / "timing.csv", timing)
    return report
