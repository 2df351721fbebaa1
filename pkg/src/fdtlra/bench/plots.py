"""Consolidated report: merged metrics, per-figure data CSVs and static plots."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .metrics import MetricsReport

# Column layout of every figure-data CSV.  Treat as a stable contract:
# new columns may be appended, existing ones are never renamed or reordered.
FIGURE_COLUMNS = {
    "tracking_error": ("source", "seed", "t", "e_norm"),
    "sigma_hat": ("source", "seed", "t", "sigma_hat"),
    "resets": ("source", "seed", "t"),
    "alpha": ("source", "t", "channel", "weight"),
}


class InvariantError(RuntimeError):
    """A produced or consumed artifact violates a documented invariant."""


def check_report(report: MetricsReport) -> None:
    for r in report.rows:
        vals = (r["median"], r["q25"], r["q75"])
        if r["metric"] == "rmse" and min(vals) < 0:
            raise InvariantError(f"negative RMSE in {r}")
        if r["metric"] == "r2" and max(vals) > 1:
            raise InvariantError(f"R^2 above 1 in {r}")
        if r["metric"] == "sigma_hat_min" and min(vals) <= 0:
            raise InvariantError(f"non-positive adaptive gain in {r}")


def _read_table(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data.reshape(-1, len(header))


def _source(path, root) -> str:
    return str(Path(path).relative_to(root)).removesuffix(".csv")


def collect(run_dirs) -> dict:
    """Walk completed run directories; returns the merged report and figure rows."""
    report = MetricsReport()
    fig = {k: [] for k in FIGURE_COLUMNS}
    for root in map(Path, run_dirs):
        if not root.is_dir():
            raise FileNotFoundError(f"run directory not found: {root}")
        for f in sorted(root.rglob("metrics.csv")):
            report.extend(MetricsReport.read_csv(f))
        for f in sorted(root.rglob("*.csv")):
            name = f.name
            if name.endswith("_alpha.csv") or name == "alpha_weights.csv":
                header, data = _read_table(f)
                w = data[:, 1:]
                if w.size and np.max(np.abs(w.sum(axis=1) - 1.0)) > 1e-9:
                    raise InvariantError(f"{f}: attention weight rows do not sum to 1")
                src = _source(f, root)
                for row in data:
                    fig["alpha"].extend((src, row[0], c, row[1 + c]) for c in range(w.shape[1]))
            elif f.parent.name == "logs":
                header, data = _read_table(f)
                col = {h: i for i, h in enumerate(header)}
                e = data[:, [col[h] for h in header if h.startswith("e_")]]
                seed, t = data[:, col["seed"]].astype(int), data[:, col["t"]]
                src = _source(f, root)
                en = np.linalg.norm(e, axis=1)
                fig["tracking_error"].extend(zip([src] * len(t), seed, t, en))
                fig["sigma_hat"].extend(zip([src] * len(t), seed, t, data[:, col["sigma_hat"]]))
                if np.any(data[:, col["sigma_hat"]] <= 0):
                    raise InvariantError(f"{f}: adaptive gain left the positive half-line")
                hit = data[:, col["reset"]] > 0
                fig["resets"].extend(zip([src] * int(hit.sum()), seed[hit], t[hit]))
    return {"report": report, "figures": fig}


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(int(v)) if isinstance(v, np.integer) else str(v)


def write_report(run_dirs, out_dir, plots: bool = True) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    got = collect(run_dirs)
    check_report(got["report"])
    got["report"].write_csv(out / "metrics.csv")
    files = [out / "metrics.csv"]
    for name, cols in FIGURE_COLUMNS.items():
        p = out / f"figure_{name}.csv"
        with open(p, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for row in got["figures"][name]:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
        files.append(p)
    if plots:
        files += draw(got["figures"], out)
    return files


def draw(fig: dict, out: Path) -> list[Path]:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    made = []

    def save(f, name):
        p = out / f"{name}.png"
        f.tight_layout()
        f.savefig(p, dpi=110, metadata={"Software": None})
        plt.close(f)
        made.append(p)

    for name, ylabel, log_y in (("tracking_error", "tracking error norm", True),
                                ("sigma_hat", "adaptive switching gain", True)):
        rows = fig[name]
        if not rows:
            continue
        f, ax = plt.subplots(figsize=(7, 3.5))
        for src in sorted({r[0] for r in rows}):
            sel = [r for r in rows if r[0] == src]
            ax.plot([r[2] for r in sel], [r[3] for r in sel], lw=0.8, label=src.split("/")[-1])
        ax.set_xlabel("t [s]")
        ax.set_ylabel(ylabel)
        if log_y:
            ax.set_yscale("log")
        ax.legend(fontsize=5, ncol=2)
        save(f, name)

    if fig["alpha"]:
        src0 = sorted({r[0] for r in fig["alpha"]})[0]
        sel = np.array([r[1:] for r in fig["alpha"] if r[0] == src0], dtype=float)
        chans = np.unique(sel[:, 1]).astype(int)
        t = sel[sel[:, 1] == chans[0], 0]
        f, ax = plt.subplots(figsize=(7, 3.5))
        ax.stackplot(t, *[sel[sel[:, 1] == c, 2] for c in chans], labels=[f"ch {c}" for c in chans])
        ax.set_xlabel("t [s]")
        ax.set_ylabel("memory attention weight")
        ax.set_title(src0, fontsize=8)
        ax.legend(fontsize=5, ncol=5, loc="upper right")
        save(f, "alpha")

    if fig["resets"]:
        f, ax = plt.subplots(figsize=(7, 2.5))
        srcs = sorted({r[0] for r in fig["resets"]})
        for i, src in enumerate(srcs):
            ts = [r[2] for r in fig["resets"] if r[0] == src]
            ax.plot(ts, np.full(len(ts), i), "|", ms=8)
        ax.set_yticks(range(len(srcs)))
        ax.set_yticklabels([s.split("/")[-1] for s in srcs], fontsize=5)
        ax.set_xlabel("t [s]")
        save(f, "resets")
    return made
