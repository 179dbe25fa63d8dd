"""Audit configuration: JSON-serializable blocks with documented defaults.

Unknown keys are rejected at every level so that typos fail loudly.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParameterError


@dataclass
class SimpsonConfig:
    alpha: float = 0.05
    normalization: str = "minmax"
    n_per_region: int = 60
    noise_sd: float = 0.3
    var1_sd: float = 0.5


@dataclass
class GwrConfig:
    kind: str = "step_x"
    grid_size: int = 32
    noise_sd: float = 0.1
    p_levels: tuple = (1.0, 3.0)
    bandwidth: float | None = None  # None: leave-one-out CV
    search: tuple = (0.5, 20.0)
    tolerance: float = 0.01
    threshold_quantile: float = 0.95
    cell_size: float | None = None  # None: infer the sample lattice


@dataclass
class KdeConfig:
    h_lo: float = 0.3
    h_hi: float = 12.0
    steps: int = 12
    cell_size: float = 0.25
    radius_factor: float = 2.0
    window_cell_size: float = 0.1


@dataclass
class MaupConfig:
    side: int = 100
    smoothness: int = 25
    q: float = 0.25
    block_sides: tuple = (5, 10, 20, 25)
    offset: tuple = (0, 0)
    ref_cell_side: float = 10.0
    cell_size: float = 1.0


@dataclass
class AccessConfig:
    d0: float = 12.0
    w_at_d0: float = 0.01
    threshold_ratio: float = 0.95
    cell_size: float = 2.0


@dataclass
class AuditConfig:
    seed: int = 42
    simpson: SimpsonConfig = field(default_factory=SimpsonConfig)
    gwr: GwrConfig = field(default_factory=GwrConfig)
    kde: KdeConfig = field(default_factory=KdeConfig)
    maup: MaupConfig = field(default_factory=MaupConfig)
    access: AccessConfig = field(default_factory=AccessConfig)
    inputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def plain(v):
            if isinstance(v, tuple):
                return [plain(x) for x in v]
            if isinstance(v, dict):
                return {k: plain(x) for k, x in v.items()}
            return v

        return plain(dataclasses.asdict(self))

    @classmethod
    def from_dict(cls, d: dict) -> "AuditConfig":
        return _build(cls, d, "config")

    @classmethod
    def load(cls, path) -> "AuditConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParameterError(f"config {path}: invalid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ParameterError(f"config {path}: top level must be an object")
        return cls.from_dict(doc)

    def merged(self, block: str, **overrides) -> "AuditConfig":
        """Copy with non-None ``overrides`` applied to one block."""
        sub = getattr(self, block)
        vals = {k: v for k, v in overrides.items() if v is not None}
        return dataclasses.replace(self, **{block: _build(type(sub), {**dataclasses.asdict(sub), **vals}, block)})


def _build(cls, d: dict, where: str):
    if not isinstance(d, dict):
        raise ParameterError(f"{where}: expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(d) - set(fields))
    if unknown:
        raise ParameterError(f"{where}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for name, value in d.items():
        default = fields[name].default_factory() if fields[name].default_factory is not dataclasses.MISSING else fields[name].default
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), value, f"{where}.{name}")
        elif isinstance(default, tuple) and isinstance(value, list):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    return cls(**kwargs)
