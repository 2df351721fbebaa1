"""Experiment configuration: YAML presets plus user overrides."""
from __future__ import annotations

import copy
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..controller.law import ControllerGains
from ..controller.loop import LoopConfig
from ..controller.pid import PidGains
from ..fdt.config import FdtConfig
from ..fdt.train import TrainConfig
from ..lra.adapter import AdapterConfig
from ..sim.dataset import load_plant_yaml, plant_from_dict
from ..sim.plant import PlantModel

PRESET_DIR = Path(__file__).parent / "presets"
PRESETS = ("desk", "paper")
SCENARIOS = ("A", "B")
METHODS = ("none", "fdt", "fdt_lra")
ABLATION_VARIANTS = ("no_lra", "no_global_token", "no_context", "no_memory")


def _check_keys(section: str, d: dict, allowed) -> None:
    unknown = set(d) - set(allowed)
    if unknown:
        raise ValueError(f"unknown keys in '{section}': {sorted(unknown)}")


def _tuple_fields(cls, d: dict) -> dict:
    out = dict(d)
    for f in dataclasses.fields(cls):
        if isinstance(out.get(f.name), list):
            out[f.name] = tuple(out[f.name])
    return out


@dataclass(frozen=True)
class DataConfig:
    payloads: tuple[float, ...] = (0.0, 0.2, 0.4)
    episodes_per_payload: int = 10
    episode_duration: float = 6.0
    speed_range: tuple[float, float] = (0.5, 1.2)
    pre_roll: float = 1.0
    split: tuple[int, int, int] = (8, 1, 1)

    def __post_init__(self):
        if not self.payloads or min(self.payloads) < 0:
            raise ValueError("payloads must be a non-empty list of non-negative masses")
        if len(self.split) != 3 or min(self.split) < 1 or sum(self.split) != self.episodes_per_payload:
            raise ValueError("split needs three positive counts summing to episodes_per_payload")
        if self.episode_duration <= 0 or self.pre_roll < 0:
            raise ValueError("episode_duration must be positive and pre_roll non-negative")
        lo, hi = self.speed_range
        if not 0 < lo <= hi:
            raise ValueError("speed_range must satisfy 0 < low <= high")


@dataclass(frozen=True)
class EvalConfig:
    scenario: str = "B"
    payload: float = 0.3
    speed: float = 1.0
    duration: float = 20.0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}")


@dataclass(frozen=True)
class ScenarioConfig:
    names: tuple[str, ...] = SCENARIOS
    payloads: tuple[float, ...] = (0.3, 0.5)
    speeds: tuple[float, ...] = (0.5, 1.0)
    duration: float = 10.0
    ramp: float = 1.0
    methods: tuple[str, ...] = METHODS
    log_members: int = 1  # batch members whose full per-tick log is written

    def __post_init__(self):
        if set(self.names) - set(SCENARIOS) or set(self.methods) - set(METHODS):
            raise ValueError(f"scenarios must be in {SCENARIOS}, methods in {METHODS}")


@dataclass(frozen=True)
class AblationConfig:
    scenario: str = "B"
    payload: float = 0.5
    speed: float = 1.0
    duration: float = 20.0
    variants: tuple[str, ...] = ABLATION_VARIANTS

    def __post_init__(self):
        if set(self.variants) - set(ABLATION_VARIANTS):
            raise ValueError(f"ablation variants must be in {ABLATION_VARIANTS}")


_SECTIONS = {"data": DataConfig, "eval": EvalConfig, "scenarios": ScenarioConfig, "ablation": AblationConfig}


@dataclass
class ExperimentConfig:
    name: str = "desk"
    seed: int = 0
    seeds: tuple[int, ...] = tuple(range(20))
    plant: dict = field(default_factory=dict)
    plant_file: str | None = None
    data: DataConfig = field(default_factory=DataConfig)
    fdt: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    adapter: dict = field(default_factory=dict)
    gains: dict = field(default_factory=dict)
    pid: dict = field(default_factory=dict)
    loop: dict = field(default_factory=dict)
    eval: EvalConfig = field(default_factory=EvalConfig)
    scenarios: ScenarioConfig = field(default_factory=ScenarioConfig)
    ablation: AblationConfig = field(default_factory=AblationConfig)

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if self.plant_file is not None and not Path(self.plant_file).is_file():
            raise FileNotFoundError(f"plant file not found: {self.plant_file}")
        # build every component once so that bad values fail here, not mid-run
        self.plant_model()
        self.fdt_config()
        self.train_config()
        self.adapter_config()
        self.controller_gains()
        self.pid_gains()
        self.loop_config()

    # -- component builders -------------------------------------------------
    def plant_model(self, payload=None) -> PlantModel:
        base = load_plant_yaml(self.plant_file) if self.plant_file else PlantModel()
        model = plant_from_dict({**_plant_dict(base), **self.plant}) if self.plant else base
        if payload is not None:
            model = dataclasses.replace(model, payload=payload)
        return model

    def fdt_config(self, variant: str = "full") -> FdtConfig:
        from ..fdt.config import ABLATIONS
        cfg = FdtConfig(n=self.plant_model().n, **self.fdt)
        return cfg.replace(**ABLATIONS[variant])

    def train_config(self) -> TrainConfig:
        return TrainConfig(**{"seed": self.seed, **self.train})

    def adapter_config(self) -> AdapterConfig:
        return AdapterConfig(**self.adapter)

    def controller_gains(self) -> ControllerGains:
        kw = dict(self.gains)
        n = self.plant_model().n
        explicit = {k: tuple(kw.pop(k)) for k in ("phi", "lam", "mbar") if k in kw}
        if explicit:
            if len(explicit) != 3:
                raise ValueError("gains: phi, lam and mbar must be given together")
            return ControllerGains(**explicit, **kw)
        return ControllerGains.table_defaults(n, **kw)

    def pid_gains(self) -> PidGains:
        return PidGains(**_tuple_fields(PidGains, self.pid))

    def loop_config(self, **kw) -> LoopConfig:
        return LoopConfig(**{**_tuple_fields(LoopConfig, self.loop), **kw})

    # -- (de)serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        d = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if dataclasses.is_dataclass(v):
                v = {k: list(x) if isinstance(x, tuple) else x for k, x in dataclasses.asdict(v).items()}
            elif isinstance(v, tuple):
                v = list(v)
            d[f.name] = copy.deepcopy(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        _check_keys("config", d, [f.name for f in dataclasses.fields(cls)])
        for name, sect in _SECTIONS.items():
            if name in d:
                sub = d[name] or {}
                _check_keys(name, sub, [f.name for f in dataclasses.fields(sect)])
                d[name] = sect(**_tuple_fields(sect, sub))
        if "seeds" in d:
            d["seeds"] = tuple(int(s) for s in d["seeds"])
        for name in ("plant", "fdt", "train", "adapter", "gains", "pid", "loop"):
            if name in d and d[name] is None:
                d[name] = {}
        return cls(**d)

    def save(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=True)


def _plant_dict(model: PlantModel) -> dict:
    from ..sim.dataset import plant_to_dict
    return plant_to_dict(model)


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_preset(name: str) -> dict:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; expected one of {PRESETS}")
    with open(PRESET_DIR / f"{name}.yaml") as fh:
        return yaml.safe_load(fh)


def load_config(path=None, preset: str = "desk", overrides: dict | None = None) -> ExperimentConfig:
    """Preset values, then the YAML file at ``path``, then ``overrides`` (nested dicts merge)."""
    d = load_preset(preset)
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        with open(path) as fh:
            user = yaml.safe_load(fh) or {}
        if not isinstance(user, dict):
            raise ValueError(f"{path}: top level must be a mapping")
        d = _merge(d, user)
    if overrides:
        d = _merge(d, overrides)
    return ExperimentConfig.from_dict(d)
