"""Run configuration: defaults, JSON files and command-line overrides.

Precedence is flag > file > per-command default > global default.  Every
validation failure raises ConfigError whose message starts with the key.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError
from .ground_state import critical_exponent

COMMANDS = ("ground", "radius", "solve", "spectrum", "pohozaev", "two-ring", "verify-all")


@dataclass(frozen=True)
class RunConfig:
    dim: int = 2
    p: float = 3.0
    alpha: float = 3.0
    a1: float = 1.0
    a2: float = 0.0
    k: int = 8
    n: int = 32
    beta: float | None = None
    h: float = 0.05
    tau: float = 0.1
    sweep: tuple[int, ...] | None = None
    num_eigs: int = 6
    all_pairs: bool = False
    quick: bool = False
    jobs: int = field(default_factory=lambda: os.cpu_count() or 1)
    seed: int = 0
    out: str = "results"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sweep"] = list(self.sweep) if self.sweep is not None else None
        return d

    def sweep_or(self, default) -> list[int]:
        return list(self.sweep) if self.sweep is not None else list(default)


COMMAND_DEFAULTS = {
    "two-ring": {"dim": 4, "p": 2.0, "alpha": 5.0, "k": 8, "n": 32},
}

KEYS = {f.name for f in fields(RunConfig)}
GRID_KEYS = {"h", "tau"}


def parse_sweep(text) -> tuple[int, ...]:
    """'8,12,16' or 'k0:k1[:step]' (inclusive, step 4 by default) or a JSON list."""
    if isinstance(text, (list, tuple)):
        vals = [int(v) for v in text]
    else:
        text = str(text).strip()
        try:
            if ":" in text:
                parts = [int(v) for v in text.split(":")]
                if len(parts) not in (2, 3):
                    raise ValueError
                step = parts[2] if len(parts) == 3 else 4
                if step <= 0:
                    raise ValueError
                vals = list(range(parts[0], parts[1] + 1, step))
            else:
                vals = [int(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"sweep: cannot parse {text!r}") from None
    if not vals:
        raise ConfigError("sweep: empty")
    return tuple(vals)


def load_file(path) -> dict:
    """Keys from a JSON config file; a run manifest is accepted and its resolved config used."""
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config: no such file {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: {path} is not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be an object")
    if "config" in data and "command" in data:
        data = dict(data["config"])
    grid = data.pop("grid", None) or {}
    if not isinstance(grid, dict):
        raise ConfigError("grid: must be an object")
    for key, val in grid.items():
        if key not in GRID_KEYS:
            raise ConfigError(f"grid.{key}: unknown key")
        data[key] = val
    for key in data:
        if key not in KEYS:
            raise ConfigError(f"{key}: unknown key")
    return data


def _coerce(key: str, value):
    kind = {f.name: f.type for f in fields(RunConfig)}[key]
    if value is None:
        if key in ("beta", "sweep"):
            return None
        raise ConfigError(f"{key}: must not be null")
    try:
        if key == "sweep":
            return parse_sweep(value)
        if "bool" in kind:
            if not isinstance(value, bool):
                raise ValueError
            return value
        if kind.startswith("int"):
            if isinstance(value, bool) or float(value) != int(value):
                raise ValueError
            return int(value)
        if "float" in kind:
            out = float(value)
            if not math.isfinite(out):
                raise ValueError
            return out
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: invalid value {value!r}") from None


def resolve(command: str, file_values: dict | None = None, flags: dict | None = None) -> RunConfig:
    if command not in COMMANDS:
        raise ConfigError(f"command: unknown {command!r}")
    merged = dict(COMMAND_DEFAULTS.get(command, {}))
    merged.update(file_values or {})
    merged.update({k: v for k, v in (flags or {}).items() if v is not None})
    cfg = replace(RunConfig(), **{k: _coerce(k, v) for k, v in merged.items()})
    validate(command, cfg)
    return cfg


def validate(command: str, cfg: RunConfig) -> None:
    if not 1 <= cfg.dim <= 4:
        raise ConfigError(f"dim: must be 1..4, got {cfg.dim}")
    if not cfg.p > 1:
        raise ConfigError(f"p: must exceed 1, got {cfg.p}")
    pc = critical_exponent(cfg.dim)
    if not cfg.p < pc:
        raise ConfigError(f"p: must be below the critical exponent {pc:g} in dim {cfg.dim}")
    if cfg.jobs < 1:
        raise ConfigError(f"jobs: must be >= 1, got {cfg.jobs}")
    if command == "ground":
        return
    bound = max(4.0 / (cfg.p - 1.0), 2.0)
    if not cfg.alpha > bound:
        raise ConfigError(f"alpha: must exceed max(4/(p-1), 2) = {bound:g}, got {cfg.alpha}")
    if cfg.a1 < 0:
        raise ConfigError(f"a1: must be >= 0, got {cfg.a1}")
    if cfg.beta is not None and not 0 < cfg.beta < cfg.alpha / (2 * math.pi):
        raise ConfigError(f"beta: must lie in (0, alpha/2π), got {cfg.beta}")
    ks = cfg.sweep if (cfg.sweep is not None and command != "two-ring") else (cfg.k,)
    for k in ks:
        if k < 2:
            raise ConfigError(f"k: must be >= 2, got {k}")
    if command in ("solve", "spectrum", "pohozaev", "verify-all"):
        if command != "verify-all" and cfg.dim != 2:
            raise ConfigError(f"dim: the PDE commands run in dim 2, got {cfg.dim}")
        if not 0 < cfg.h <= 0.1:
            raise ConfigError(f"h: must lie in (0, 0.1], got {cfg.h}")
        if not 0 < cfg.tau < min(cfg.p - 1, 1.0):
            raise ConfigError(f"tau: must lie in (0, min(p-1, 1)), got {cfg.tau}")
    if command == "spectrum" and not 1 <= cfg.num_eigs <= 12:
        raise ConfigError(f"num_eigs: must be 1..12, got {cfg.num_eigs}")
    if command == "two-ring":
        if cfg.dim < 4:
            raise ConfigError(f"dim: the two-ring construction needs dim >= 4, got {cfg.dim}")
        if cfg.k % 2:
            raise ConfigError(f"k: must be even, got {cfg.k}")
        for n in cfg.sweep_or([cfg.n]):
            if n % 2 or n < cfg.k:
                raise ConfigError(f"n: must be even and >= k, got {n}")
    if command == "radius" and cfg.dim < 2:
        raise ConfigError(f"dim: rings need dim >= 2, got {cfg.dim}")
