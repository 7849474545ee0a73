"""Run configuration: defaults, flat ``key = value`` files, JSON replay and CLI overrides."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from pssclock.errors import ClockError, ConfigError, InvalidParameterError

logger = logging.getLogger(__name__)

COMMANDS = ("cumulants", "iinf-check", "mellin-check", "ergodicity", "lln", "clt", "fclt", "simulate-clock")
FORMATS = ("csv", "json")
# family specs contain commas, so lists of them are ';'-separated
FAMILY_SEPARATOR = ";"

_ALIASES = {"family": "families", "logT": "log_t", "logt": "log_t", "replicas": "n"}


@dataclass(frozen=True)
class RunConfig:
    """Every knob of a run, resolved."""
    command: str = ""
    families: tuple[str, ...] = ()
    regime: str = "Qa"
    a: float = 1.0
    log_t: float = 400.0
    n: int = 4000
    t_grid: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0, 1.5, 2.0)
    lln_log_t: tuple[float, ...] = (100.0, 1000.0, 10000.0)
    times: tuple[float, ...] = (0.5, 1.0, 2.0, 5.0, 10.0)
    seed: int = 20240101
    workers: int = 1
    dt: float = 1e-3
    draws: int = 100_000
    ks_draws: int = 0
    C: float | None = None
    output: str | None = None
    format: str = "csv"
    dump_paths: bool = False
    bias_allowance: bool = False

    def __post_init__(self):
        for name in ("t_grid", "lln_log_t", "times"):
            if not getattr(self, name):
                raise InvalidParameterError(f"{name} must not be empty")
        if self.command and self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got {self.format!r}")
        if self.regime not in ("Qa", "Q0"):
            raise ConfigError(f"regime must be 'Qa' or 'Q0', got {self.regime!r}")

    @classmethod
    def from_mapping(cls, mapping: dict) -> RunConfig:
        """Build from string or typed values; unknown keys are errors."""
        return cls(**_typed(mapping))

    def to_mapping(self) -> dict:
        """JSON-ready mapping that :meth:`from_mapping` turns back into an equal config."""
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out

    def merged(self, overrides: dict) -> RunConfig:
        """This config with ``overrides`` (already typed or strings) applied on top."""
        return replace(self, **_typed(overrides))


def _typed(mapping: dict) -> dict:
    types = {f.name: f.type for f in fields(RunConfig)}
    out = {}
    for raw_key, value in mapping.items():
        key = _ALIASES.get(raw_key, raw_key.replace("-", "_"))
        if key not in types:
            raise ConfigError(f"unknown config key {raw_key!r}")
        out[key] = _convert(key, types[key], value)
    return out


def _convert(key: str, type_name: str, value):
    if key == "seed":
        return resolve_seed(value)
    try:
        if "tuple[str" in type_name:
            if isinstance(value, str):
                return tuple(s.strip() for s in value.split(FAMILY_SEPARATOR) if s.strip())
            return tuple(str(v) for v in value)
        if "tuple[float" in type_name:
            if isinstance(value, str):
                value = value.replace(",", " ").split()
            return tuple(float(v) for v in value)
        if type_name == "bool":
            if isinstance(value, bool):
                return value
            lowered = str(value).strip().lower()
            if lowered not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(value)
            return lowered in ("true", "1", "yes")
        if type_name == "int":
            number = float(value) if isinstance(value, str) else value
            if isinstance(value, bool) or not float(number).is_integer():
                raise ValueError(value)
            return int(number)
        if type_name == "float":
            return float(value)
        if type_name == "float | None":
            return None if value in (None, "", "none", "None") else float(value)
        if type_name == "str | None":
            return None if value in (None, "", "none", "None") else str(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"config key {key!r}: cannot read {value!r}") from None


def read_config_file(path: str | Path) -> dict:
    """Mapping from a flat ``key = value`` file, or the ``"config"`` object of a JSON summary."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ClockError(f"{path}: {exc.strerror or exc}") from exc
    if path.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        mapping = data.get("config", data) if isinstance(data, dict) else None
        if not isinstance(mapping, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return mapping
    mapping = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        mapping[key.strip()] = value.strip()
    return mapping


def resolve_seed(value) -> int:
    """An explicit integer seed, or fresh entropy for ``auto``."""
    if isinstance(value, str) and value.strip().lower() == "auto":
        seed = int(np.random.SeedSequence().entropy % (2 ** 63))
        logger.info("drew seed %d", seed)
        return seed
    try:
        seed = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"seed must be an integer or 'auto', got {value!r}") from None
    if seed < 0:
        raise ConfigError(f"seed must be >= 0, got {seed}")
    return seed


def load_config(command: str, config_file: str | None, overrides: dict) -> RunConfig:
    """defaults < ``config_file`` < ``overrides``."""
    cfg = RunConfig(command=command)
    if config_file:
        file_map = read_config_file(config_file)
        file_map.pop("command", None)
        cfg = cfg.merged(file_map)
    if overrides:
        cfg = cfg.merged(overrides)
    return cfg
