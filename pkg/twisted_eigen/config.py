"""
Twisted Eigen, Copyright (c) contributors.
See also LICENSE.md
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Optional

from dotenv import load_dotenv

from twisted_eigen.common import TwistedEigenError
from twisted_eigen.params import ProblemParams, validate

CONFIG_ENV = "TWISTED_EIG_CONFIG"
OUTPUTS = ("json", "csv")
METHODS = ("structured", "direct", "both")
SUITES = ("scaling", "monotonic", "comparison", "pohozaev", "flux", "divergence", "hadamard", "rearrange", "all")
SHAPES = ("circle", "ellipse", "pball")


class ConfigError(TwistedEigenError):
    """Configuration file or values are invalid."""


@dataclass(frozen=True)
class RunConfig:
    p: float = 2.0
    q: float = 2.0
    dim: int = 2
    ode_tol: float = 1e-10
    newton_tol: float = 1e-10
    zero_tol: float = 1e-12
    grid: int = 512
    samples: int = 2049
    total_volume: Optional[float] = None
    steps: int = 33
    radius: float = 1.0
    r1: Optional[float] = None
    r2: Optional[float] = None
    method: str = "structured"
    suite: str = "all"
    shape: str = "circle"
    a: float = 1.0
    b: float = 2.0
    seed: int = 0
    # None picks the command default: CSV for sweeps, JSON otherwise
    out: Optional[str] = None
    timing: bool = False

    def __post_init__(self):
        for name in ("ode_tol", "newton_tol", "zero_tol", "radius", "a", "b"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive ({name}={getattr(self, name)})")
        for name in ("r1", "r2", "total_volume"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigError(f"{name} must be positive ({name}={value})")
        if self.grid < 64:
            raise ConfigError(f"grid must be at least 64 (grid={self.grid})")
        if self.samples < 16:
            raise ConfigError(f"samples must be at least 16 (samples={self.samples})")
        if self.steps < 8:
            raise ConfigError(f"steps must be at least 8 (steps={self.steps})")
        choices = {"out": OUTPUTS, "method": METHODS, "suite": SUITES, "shape": SHAPES}
        for name, allowed in choices.items():
            if name == "out" and self.out is None:
                continue
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name} must be one of {', '.join(allowed)} (got {getattr(self, name)!r})")

    @property
    def params(self) -> ProblemParams:
        return validate(self.p, self.q, self.dim)

    def as_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def config_path(explicit: Optional[str] = None) -> Optional[Path]:
    """--config wins over TWISTED_EIG_CONFIG (which may come from a .env file)."""
    load_dotenv()
    path = explicit or os.getenv(CONFIG_ENV)
    return Path(path) if path else None


def load_config_file(path: Path) -> dict[str, Any]:
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        with open(path) as f:
            values = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(values, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown config keys in {path}: {', '.join(unknown)}")
    return values


def resolve_config(overrides: Optional[dict[str, Any]] = None, path: Optional[str] = None) -> RunConfig:
    """Defaults, then the config file, then explicit overrides (None values are ignored)."""
    values: dict[str, Any] = {}
    file_path = config_path(path)
    if file_path is not None:
        values.update(load_config_file(file_path))
    values.update({key: value for key, value in (overrides or {}).items() if value is not None})
    try:
        return RunConfig(**values)
    except TypeError as e:
        raise ConfigError(str(e)) from e
