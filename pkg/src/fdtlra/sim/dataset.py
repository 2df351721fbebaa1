"""Residual datasets on disk: CSV records, JSON metadata and YAML plant configs."""
from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .disturbance import PayloadSchedule
from .plant import PlantModel
from .residual import compute_residual, mbar_diagonal

FIELDS = ("chi", "chi_dot", "chi_ddot", "tau", "r")


@dataclass(frozen=True)
class ResidualSample:
    t: float
    chi: np.ndarray
    chi_dot: np.ndarray
    chi_ddot: np.ndarray
    tau: np.ndarray
    r: np.ndarray

    def consistent_with(self, mbar, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.r, compute_residual(mbar, self.tau, self.chi_ddot), rtol=0, atol=atol))


@dataclass
class ResidualLog:
    """A time series of residual samples stored column-wise, each field ``(T, n)``."""

    t: np.ndarray
    chi: np.ndarray
    chi_dot: np.ndarray
    chi_ddot: np.ndarray
    tau: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        shape = None
        for name in FIELDS:
            a = np.asarray(getattr(self, name), dtype=np.float64)
            setattr(self, name, a)
            if a.ndim != 2 or a.shape[0] != self.t.size:
                raise ValueError(f"{name} must have shape (T, n) with T = len(t)")
            if shape is not None and a.shape != shape:
                raise ValueError("all fields must share one shape")
            shape = a.shape

    @property
    def n(self) -> int:
        return self.chi.shape[1]

    def __len__(self) -> int:
        return self.t.size

    def __getitem__(self, i: int) -> ResidualSample:
        return ResidualSample(float(self.t[i]), *(getattr(self, f)[i] for f in FIELDS))

    def slice(self, start: int, stop: int) -> "ResidualLog":
        return ResidualLog(self.t[start:stop], *(getattr(self, f)[start:stop] for f in FIELDS))

    def inputs(self) -> np.ndarray:
        """Model input channels ``(chi, chi_dot, tau_prev)``, shape ``(T, 3n)``.

        Record ``t`` stores the input that was held over the preceding control
        interval (the one that produced ``chi_ddot[t]``), so from the point of
        view of the controller deciding at ``t`` it already is the previous input.
        """
        return np.concatenate([self.chi, self.chi_dot, self.tau], axis=1)


def header(n: int) -> list[str]:
    return ["t"] + [f"{f}_{i}" for f in FIELDS for i in range(n)]


def write_csv(path, log: ResidualLog) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = np.column_stack([log.t] + [getattr(log, f) for f in FIELDS])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header(log.n))
        # repr() round-trips float64 exactly
        w.writerows([[repr(float(v)) for v in row] for row in rows])


def read_csv(path) -> ResidualLog:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        head = next(reader)
        data = np.array([[float(v) for v in row] for row in reader], dtype=np.float64)
    n = (len(head) - 1) // len(FIELDS)
    if head != header(n):
        raise ValueError(f"{path}: unexpected header")
    data = data.reshape(-1, len(head))
    cols = [data[:, 1 + k * n: 1 + (k + 1) * n] for k in range(len(FIELDS))]
    return ResidualLog(data[:, 0], *cols)


def write_json(path, obj) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def plant_to_dict(model: PlantModel) -> dict:
    d = {}
    for f in dataclasses.fields(model):
        v = getattr(model, f.name)
        if f.name == "payload":
            v = {"initial": v.initial, "events": [list(e) for e in v.events]}
        elif isinstance(v, tuple):
            v = [float(x) for x in v]
        d[f.name] = v
    return d


def plant_from_dict(d: dict) -> PlantModel:
    d = dict(d)
    kw = {}
    if "payload" in d:
        p = d.pop("payload") or {}
        kw["payload"] = PayloadSchedule(tuple(tuple(e) for e in p.get("events", ())), p.get("initial", 0.0))
    names = {f.name for f in dataclasses.fields(PlantModel)}
    unknown = set(d) - names
    if unknown:
        raise ValueError(f"unknown plant keys: {sorted(unknown)}")
    for k, v in d.items():
        kw[k] = tuple(v) if isinstance(v, list) else v
    return PlantModel(**kw)


def save_plant_yaml(path, model: PlantModel) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        yaml.safe_dump({"plant": plant_to_dict(model)}, fh, sort_keys=True)


def load_plant_yaml(path) -> PlantModel:
    with open(path) as fh:
        d = yaml.safe_load(fh) or {}
    return plant_from_dict(d.get("plant", d))


def check_residuals(log: ResidualLog, mbar, atol: float = 1e-9) -> float:
    """Max deviation of logged ``r`` from ``tau - Mbar chi_ddot``; raises above ``atol``."""
    m = mbar_diagonal(mbar)
    err = float(np.max(np.abs(log.r - (log.tau - m * log.chi_ddot)), initial=0.0))
    if err > atol:
        raise ValueError(f"logged residuals inconsistent with Mbar (max error {err:.3e})")
    return err
