"""Declarative run configuration (YAML or JSON) with documented defaults."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .pipeline.config import HyperParams


class ConfigError(ValueError):
    pass


@dataclass
class DatasetConfig:
    # "synthetic": sample ``model`` using parameter ``family``; "csv": read ``path``
    source: str = "synthetic"
    model: str = "E"
    family: str = "interference"
    n: int = 6000
    seed: int | None = None           # None -> master seed
    params: dict = field(default_factory=dict)
    path: str | None = None
    feature_columns: list | None = None
    task_column: str = "y"
    nuisance_column: str | None = "s"
    mask_fraction: float = 0.0


@dataclass
class RunConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    hyper: HyperParams = field(default_factory=HyperParams)
    catalog: list | None = None       # None -> all of A..K
    models: list | None = None        # run-id / letter filter applied after expansion
    strategies: list = field(default_factory=lambda: ["z", "s", "y"])
    variational: list = field(default_factory=lambda: [False, True])
    ensemble: list = field(default_factory=lambda: ["mlp", "lr"])
    ensemble_kfold: int = 0           # 0 -> in-sample stacking
    val_fraction: float = 0.2
    stratify: str | None = "task"
    out: str = "autobayes-out"
    seed: int = 0
    workers: int | None = None        # None -> os.cpu_count()
    report_wall_time: bool = False    # wall_time stays out of results.csv unless set
    exhaustive: bool = False          # enumerate: every full-chain edge subset
    budget: int = 100

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hyper"] = self.hyper.to_dict()
        return d


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    return data


def config_from_dict(data: dict | None) -> RunConfig:
    data = dict(data or {})
    _build(RunConfig, data, "config")
    try:
        if "dataset" in data:
            data["dataset"] = DatasetConfig(**_build(DatasetConfig, data["dataset"], "dataset"))
        if "hyper" in data:
            data["hyper"] = HyperParams.from_dict(data["hyper"])
        cfg = RunConfig(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    ds = cfg.dataset
    if ds.source not in ("synthetic", "csv"):
        raise ConfigError(f"dataset.source must be 'synthetic' or 'csv', got {ds.source!r}")
    if ds.source == "csv" and not ds.path:
        raise ConfigError("dataset.path is required for csv sources")
    if ds.n < 1:
        raise ConfigError("dataset.n must be positive")
    if not 0.0 <= ds.mask_fraction < 1.0:
        raise ConfigError("dataset.mask_fraction must lie in [0, 1)")
    if not 0.0 < cfg.val_fraction < 1.0:
        raise ConfigError("val_fraction must lie strictly between 0 and 1")
    bad = set(cfg.ensemble) - {"mlp", "lr"}
    if bad:
        raise ConfigError(f"unknown ensemble kinds {sorted(bad)}")
    bad = set(cfg.strategies) - {"z", "s", "y"}
    if bad:
        raise ConfigError(f"unknown strategies {sorted(bad)}")
    if not set(cfg.variational) <= {True, False} or not cfg.variational:
        raise ConfigError("variational must be a nonempty subset of [false, true]")
    if (cfg.workers is not None and cfg.workers < 1) or cfg.budget < 1 or cfg.seed < 0 or cfg.ensemble_kfold < 0 or cfg.ensemble_kfold == 1:
        raise ConfigError("workers/budget must be positive, seed unsigned, ensemble_kfold 0 or >= 2")


def load_config(path: str | os.PathLike | None) -> RunConfig:
    if path is None:
        return config_from_dict({})
    p = Path(path)
    try:
        data = yaml.safe_load(p.read_text(encoding="utf-8"))  # JSON is valid YAML
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {p}: {exc}") from exc
    return config_from_dict(data or {})
