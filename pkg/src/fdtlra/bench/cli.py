"""``fdtlra`` command line: data generation, training, evaluation, scenario grids, ablations, reports."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import manifest
from .config import ABLATION_VARIANTS, METHODS, PRESETS, SCENARIOS, ExperimentConfig, load_config

log = logging.getLogger("fdtlra")

STRUCTURAL = tuple(v for v in ABLATION_VARIANTS if v != "no_lra")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML file merged over the preset")
    p.add_argument("--preset", choices=PRESETS, default="desk")
    p.add_argument("--seed", type=int, help="master seed for data and training (overrides config)")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fdtlra", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-data", help="simulate PID-tracked excitation flights per payload")
    _common(p)

    p = sub.add_parser("train", help="train the forecaster (and optionally ablation variants)")
    _common(p)
    p.add_argument("--data", type=Path, help="dataset directory (default OUT/data)")
    p.add_argument("--variant", action="append", choices=("full", "all") + STRUCTURAL,
                   help="model variant, repeatable; 'all' = full plus every structural ablation")
    p.add_argument("--shuffle-labels", action="store_true", help="control run with permuted targets")

    p = sub.add_parser("eval-prediction", help="open-loop residual prediction on the held-out payload")
    _common(p)
    p.add_argument("--checkpoint", type=Path, help="default OUT/checkpoints/full.ckpt")

    p = sub.add_parser("run-scenario", help="closed-loop tracking grid")
    _common(p)
    p.add_argument("--checkpoint", type=Path, help="default OUT/checkpoints/full.ckpt")
    p.add_argument("--scenario", choices=SCENARIOS, action="append", help="restrict the grid (repeatable)")
    p.add_argument("--payload", type=float, action="append", help="restrict the grid (repeatable)")
    p.add_argument("--speed", type=float, action="append", help="restrict the grid (repeatable)")
    p.add_argument("--method", choices=METHODS, action="append", help="restrict methods (repeatable)")

    p = sub.add_parser("ablate", help="ablation study against the full model")
    _common(p)
    p.add_argument("--checkpoint-dir", type=Path, help="default OUT/checkpoints")

    p = sub.add_parser("report", help="merge run directories into one report with plots")
    p.add_argument("runs", nargs="*", type=Path, help="completed run directories")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--no-plots", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true")
    return ap


def resolve_config(args) -> ExperimentConfig:
    over = {"seed": args.seed} if args.seed is not None else None
    return load_config(args.config, args.preset, over)


def _save_config(cfg: ExperimentConfig, out: Path, command: str) -> Path:
    path = out / "configs" / f"{command}.yaml"
    cfg.save(path)
    return path


def _load_model(path: Path):
    from ..fdt.model import FdtModel
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}; run 'fdtlra train' first")
    return FdtModel.load(path)


def cmd_generate_data(args, cfg: ExperimentConfig) -> list[Path]:
    from .data import generate_dataset, write_dataset
    ds = generate_dataset(cfg)
    files = write_dataset(args.out / "data", ds, cfg)
    log.info("wrote %d episodes (%d samples) to %s", sum(len(v) for v in ds.values()),
             sum(len(x) for v in ds.values() for x in v), args.out / "data")
    return files


def cmd_train(args, cfg: ExperimentConfig) -> list[Path]:
    from .data import load_dataset
    from .experiments import train_variant
    groups, _ = load_dataset(args.data or args.out / "data")
    variants = args.variant or ["full"]
    if "all" in variants:
        variants = ["full", *STRUCTURAL]
    ck = args.out / "checkpoints"
    files = []
    for v in dict.fromkeys(variants):
        def progress(row, v=v):
            log.info("[%s] epoch %d train %.5f val %.5f", v, row["epoch"], row["train_loss"], row["val_loss"])
        res = train_variant(cfg, groups, v, ck, shuffle_labels=args.shuffle_labels, progress=progress)
        print(f"{v}: best epoch {res.best_epoch}, val loss {res.best_val_loss:.6g}"
              f"{' (early stop)' if res.stopped_early else ''}")
        tag = v + ("_shuffled" if args.shuffle_labels else "")
        files += [ck / f"{tag}.ckpt", ck / f"{tag}_training_log.csv", ck / f"{tag}_wall_times.csv"]
    args.manifest_key = "train:" + ",".join(dict.fromkeys(variants)) + (":shuffled" if args.shuffle_labels else "")
    return files


def cmd_eval_prediction(args, cfg: ExperimentConfig) -> list[Path]:
    from .experiments import eval_prediction
    model = _load_model(args.checkpoint or args.out / "checkpoints" / "full.ckpt")
    out = args.out / "prediction"
    report = eval_prediction(cfg, model, out)
    for m in ("fdt", "fdt_lra"):
        print(f"{m:8s} rmse {report.value(method=m, metric='rmse'):.4f}  r2 {report.value(method=m, metric='r2'):.4f}")
    return sorted(out.rglob("*.csv"))


def cmd_run_scenario(args, cfg: ExperimentConfig) -> list[Path]:
    import dataclasses

    from .experiments import grid_cells, grid_orderings, run_grid
    from .plots import InvariantError, check_report
    if args.method:
        cfg.scenarios = dataclasses.replace(cfg.scenarios, methods=tuple(dict.fromkeys(args.method)))
    cells = [c for c in grid_cells(cfg)
             if (not args.scenario or c[0] in args.scenario)
             and (not args.payload or c[1] in args.payload)
             and (not args.speed or c[2] in args.speed)]
    if not cells:
        raise ValueError("the scenario/payload/speed filters select no grid cell")
    needs_model = {"fdt", "fdt_lra"} & set(cfg.scenarios.methods)
    model = _load_model(args.checkpoint or args.out / "checkpoints" / "full.ckpt") if needs_model else None
    out = args.out / "scenarios"

    def progress(sc, m, v, meth, vals):
        log.info("%s m=%.2f v=%.2f %-8s median rmse %.4f", sc, m, v, meth, float(sorted(vals)[len(vals) // 2]))
    report, per_seed = run_grid(cfg, model, out, cells, progress)
    check_report(report)
    for r in report.select(metric="rmse"):
        print(f"{r['scenario']} m={r['payload']:.2f} v={r['speed']:.2f} {r['method']:8s} "
              f"{r['median']:.4f} [{r['q25']:.4f}, {r['q75']:.4f}]")
    if set(METHODS) <= set(cfg.scenarios.methods):
        for row in grid_orderings(per_seed):
            if not row["ok"]:
                print(f"ordering not met: {row}")
    if any(r["median"] <= 0 for r in report.select(metric="sigma_hat_min")):  # minimum over seeds and ticks
        raise InvariantError("adaptive switching gain reached zero")
    return sorted(out.rglob("*.csv"))


def cmd_ablate(args, cfg: ExperimentConfig) -> list[Path]:
    from .experiments import run_ablation
    ck = args.checkpoint_dir or args.out / "checkpoints"
    need = ["full"] + [v for v in cfg.ablation.variants if v != "no_lra"]
    models = {v: _load_model(ck / f"{v}.ckpt") for v in need}
    out = args.out / "ablation"
    report = run_ablation(cfg, models, out)
    for r in report.select(metric="delta_rmse_pct"):
        print(f"{r['method']:16s} delta rmse {r['median']:+.1f}%")
    return sorted(out.rglob("*.csv"))


COMMANDS = {"generate-data": cmd_generate_data, "train": cmd_train, "eval-prediction": cmd_eval_prediction,
            "run-scenario": cmd_run_scenario, "ablate": cmd_ablate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "report":
            from .plots import write_report
            files = write_report(args.runs, args.out, plots=not args.no_plots)
            print(f"report written to {args.out} ({len(files)} files)")
            return 0
        cfg = resolve_config(args)
        cfg_path = _save_config(cfg, args.out, args.command)
        files = COMMANDS[args.command](args, cfg)
        key = getattr(args, "manifest_key", args.command)
        manifest.record(args.out, key, cfg_path, cfg.seed, cfg.seeds, [cfg_path, *files])
    except (ValueError, KeyError, FileNotFoundError, FloatingPointError, RuntimeError) as exc:
        print(f"fdtlra {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
