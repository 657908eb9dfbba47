"""Run configuration: JSON document plus command-line overrides."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field: str, msg: str):
        super().__init__(f"{field}: {msg}")
        self.field = field


@dataclass
class RunConfig:
    system: str = "acoustic"
    dim: int = 2
    N: int = 3
    M: int | None = 1  # None selects full quadrature WADG
    mode: str = "fast"
    mesh: str = "uniform:8"
    wavespeed: str = "sine:1"
    T: float = 1.0
    cfl: float = 0.5
    tau_p: float = 1.0
    tau_u: float = 1.0
    tau_v: float = 1.0
    tau_sigma: float = 1.0
    out: str = "out"
    seed: int = 0
    vtk: bool = False

    def validate(self) -> "RunConfig":
        if self.system not in ("acoustic", "elastic"):
            raise ConfigError("system", "must be 'acoustic' or 'elastic'")
        if self.dim not in (2, 3):
            raise ConfigError("dim", "must be 2 or 3")
        if self.system == "elastic" and self.dim != 3:
            raise ConfigError("dim", "the elastic system is 3D only")
        if self.N < 1:
            raise ConfigError("N", "must be >= 1")
        if self.M is not None and not 0 <= self.M <= self.N:
            raise ConfigError("M", "must satisfy 0 <= M <= N")
        if self.mode not in ("oracle", "fast"):
            raise ConfigError("mode", "must be 'oracle' or 'fast'")
        if self.M is None and self.mode == "fast":
            raise ConfigError("M", "full WADG (M=wadg) requires mode 'oracle'")
        if not self.T > 0:
            raise ConfigError("T", "must be positive")
        if not 0 < self.cfl <= 2:
            raise ConfigError("cfl", "must lie in (0, 2]")
        for name in ("tau_p", "tau_u", "tau_v", "tau_sigma"):
            if getattr(self, name) < 0:
                raise ConfigError(name, "penalties must be non-negative")
        kind, _, arg = self.mesh.partition(":")
        if kind not in ("uniform", "gmsh") or not arg:
            raise ConfigError("mesh", "use uniform:n or gmsh:path")
        if kind == "uniform" and (not arg.isdigit() or int(arg) < 1):
            raise ConfigError("mesh", "uniform:n needs a positive integer n")
        kind = self.wavespeed.partition(":")[0]
        if kind not in ("sine", "const"):
            raise ConfigError("wavespeed", "use sine:k or const:v")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def parse_M(value) -> int | None:
    if value is None or isinstance(value, int):
        return value
    if str(value).lower() in ("wadg", "none", "full"):
        return None
    return int(value)


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Merge a JSON file (if any) with non-``None`` overrides; flags win."""
    data = {}
    if path is not None:
        data = json.loads(Path(path).read_text())
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown configuration field")
    for k, v in (overrides or {}).items():
        if v is not None and k in known:
            data[k] = v
    if "M" in data:
        data["M"] = parse_M(data["M"])
    return RunConfig(**data).validate()
