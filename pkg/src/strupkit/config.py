"""Run configuration files: strict JSON with defaults and flag overrides."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

from .errors import ConfigurationError
from .systems import IntegratorConfig
from .training import TrainConfig

CONFIG_VERSION = 1


@dataclass(frozen=True)
class RunConfig:
    format_version: int = CONFIG_VERSION
    # training
    epochs: int = 50_000
    lr: float = 0.002
    l2: float = 0.0
    seed: int = 0
    log_every: int = 100
    # reference integrator
    tol: float = 1e-13
    max_steps: int = 200_000
    # data
    system: Optional[str] = None
    n_data: int = 100
    h: Optional[float] = None
    data_seed: int = 1
    test_seed: int = 2
    # architecture
    method: Optional[str] = None
    layers: Optional[int] = None
    width: Optional[int] = None
    degree: Optional[int] = None
    sublayers: Optional[int] = None
    bounded: bool = False
    init_scale: float = 0.01
    # grid
    grid: list = field(default_factory=list)
    workers: Optional[int] = None

    def train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, learning_rate=self.lr, l2_weight=self.l2,
                           seed=self.seed, log_every=min(self.log_every, self.epochs))

    def integrator_config(self) -> IntegratorConfig:
        return IntegratorConfig(abs_tol=self.tol, rel_tol=self.tol, max_steps=self.max_steps)

    def hyper(self) -> dict:
        out = {}
        for key in ("layers", "width", "degree", "sublayers"):
            v = getattr(self, key)
            if v is not None:
                out[key] = v
        if self.bounded:
            out["bounded"] = True
        return out

    def to_dict(self) -> dict:
        return asdict(self)


_TYPES = {f.name: f for f in fields(RunConfig)}


def _coerce(key: str, value: Any):
    default = _TYPES[key].default
    kind = type(default) if default is not None and not callable(default) else None
    if key in ("h",):
        kind = float
    elif key in ("layers", "width", "degree", "sublayers", "workers"):
        kind = int
    elif key in ("system", "method"):
        kind = str
    elif key == "grid":
        kind = list
    if value is None:
        if default is None:
            return None
        raise ConfigurationError(f"config key {key!r} may not be null")
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigurationError(f"config key {key!r} must be true or false")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigurationError(f"config key {key!r} must be an integer, got {value!r}")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"config key {key!r} must be a number, got {value!r}")
        return float(value)
    if kind is str and not isinstance(value, str):
        raise ConfigurationError(f"config key {key!r} must be a string, got {value!r}")
    if kind is list and not isinstance(value, list):
        raise ConfigurationError(f"config key {key!r} must be a list")
    return value


def config_from_dict(data: dict, overrides: dict | None = None) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigurationError("config root must be a JSON object")
    for key in data:
        if key not in _TYPES:
            raise ConfigurationError(f"unknown config key {key!r}")
    version = data.get("format_version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigurationError(f"unsupported config format_version {version!r}")
    values = {k: _coerce(k, v) for k, v in data.items()}
    cfg = RunConfig(**values)
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    _validate(cfg)
    return cfg


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """Flags win over file values; ``None`` means the flag was not given."""
    changes = {}
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in _TYPES:
            raise ConfigurationError(f"unknown config key {key!r}")
        changes[key] = _coerce(key, value)
    out = replace(cfg, **changes)
    _validate(out)
    return out


def _validate(cfg: RunConfig):
    if cfg.epochs < 1:
        raise ConfigurationError("epochs must be at least 1")
    if not cfg.lr > 0:
        raise ConfigurationError("lr must be positive")
    if cfg.l2 < 0:
        raise ConfigurationError("l2 must be non-negative")
    if not cfg.tol > 0:
        raise ConfigurationError("tol must be positive")
    if cfg.n_data < 1:
        raise ConfigurationError("n_data must be at least 1")
    if cfg.log_every < 1:
        raise ConfigurationError("log_every must be at least 1")


def load_config(path, overrides: dict | None = None) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data, overrides)
