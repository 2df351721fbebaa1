"""Error metrics, seed statistics and the tabular metrics report."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def rmse(pred, target, axis=None):
    """Root mean squared error over ``axis`` (all elements by default)."""
    d = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return np.sqrt(np.mean(d * d, axis=axis))


def r2_score(pred, target):
    """``1 - SSE/SST`` per channel (last axis), averaged over channels.

    Time runs along axis ``-2``; leading axes (e.g. seeds) are kept.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    sse = np.sum((pred - target) ** 2, axis=-2)
    sst = np.sum((target - target.mean(axis=-2, keepdims=True)) ** 2, axis=-2)
    if np.any(sst == 0):
        raise ValueError("R^2 undefined for a constant target channel")
    return np.mean(1.0 - sse / sst, axis=-1)


def median_iqr(values) -> tuple[float, float, float]:
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("no values")
    q25, med, q75 = np.percentile(v, [25, 50, 75])
    return float(med), float(q25), float(q75)


def delta_percent(value: float, reference: float) -> float:
    """Relative change of ``value`` against ``reference`` in percent."""
    if reference <= 0:
        raise ValueError("reference must be positive")
    return 100.0 * (value / reference - 1.0)


REPORT_COLUMNS = ("experiment", "scenario", "payload", "speed", "method", "metric",
                  "median", "q25", "q75", "n_seeds")


@dataclass
class MetricsReport:
    """Rows of seed statistics; each row summarizes one metric of one method in one condition."""

    rows: list[dict] = field(default_factory=list)

    def add(self, experiment: str, method: str, metric: str, values, scenario: str = "",
            payload=None, speed=None) -> dict:
        med, q25, q75 = median_iqr(values)
        row = {"experiment": experiment, "scenario": scenario,
               "payload": "" if payload is None else float(payload),
               "speed": "" if speed is None else float(speed), "method": method, "metric": metric,
               "median": med, "q25": q25, "q75": q75, "n_seeds": int(np.size(values))}
        self.rows.append(row)
        return row

    def add_value(self, experiment: str, method: str, metric: str, value: float, **kw) -> dict:
        return self.add(experiment, method, metric, [value], **kw)

    def select(self, **match) -> list[dict]:
        return [r for r in self.rows if all(r.get(k) == v for k, v in match.items())]

    def value(self, **match) -> float:
        rows = self.select(**match)
        if len(rows) != 1:
            raise KeyError(f"{len(rows)} rows match {match}")
        return rows[0]["median"]

    def extend(self, other: "MetricsReport") -> None:
        self.rows.extend(other.rows)

    def write_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS, lineterminator="\n")
            w.writeheader()
            for r in self.rows:
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})

    @classmethod
    def read_csv(cls, path) -> "MetricsReport":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
                raise ValueError(f"{path}: not a metrics report")
            for r in reader:
                for k in ("median", "q25", "q75"):
                    r[k] = float(r[k])
                for k in ("payload", "speed"):
                    r[k] = float(r[k]) if r[k] else ""
                r["n_seeds"] = int(r["n_seeds"])
                rows.append(r)
        return cls(rows)
