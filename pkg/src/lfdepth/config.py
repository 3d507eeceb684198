"""Pipeline tunables and their TOML/JSON serialization."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import tomli_w

from .diffusion import DIRECTIONAL_DATA_WEIGHT, EPS, SolverConfig
from .lightfield import ParameterError, tomllib


@dataclass
class PipelineConfig:
    # EPI lines
    tau_f: float = math.pi / 13
    tau_v: float = math.pi / 10
    c: float = 4.0
    d_max: float = 2.0
    bank_size: int = 33
    response_threshold: float = 0.02
    nms_radius: int = 2
    # entropy search
    alpha: float = 0.15
    t: float = 0.88
    refine_iters: int = 10
    entropy_bins: int = 32
    # trilateral filter
    sigma_s: float = 10.0
    sigma_d: float = 0.1
    sigma_c: float = 0.5
    # diffusion
    omega: float = 150.0
    a: float = 3.0
    data_weight: float = DIRECTIONAL_DATA_WEIGHT
    eps: float = EPS
    flat_tol: float = 1e-3
    joint_profile_norm: bool = True
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if isinstance(self.solver, dict):
            self.solver = SolverConfig(**self.solver)
        if self.d_max <= 0:
            raise ParameterError("d_max must be positive")
        if self.bank_size < 3 or self.bank_size % 2 == 0:
            raise ParameterError("bank_size must be odd and >= 3")
        if self.c < 1:
            raise ParameterError("c must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        """Build from a mapping; a ``paper_defaults`` table, if present, is the base layer."""
        data = dict(data)
        base = dict(data.pop("paper_defaults", {}) or {})
        merged = {**base, **data.pop("pipeline", {}), **data}
        known = {f.name for f in fields(cls)}
        unknown = set(merged) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**merged)

    def to_toml(self) -> str:
        return tomli_w.dumps({"pipeline": self.to_dict()})

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        data = json.loads(text) if path.suffix.lower() == ".json" else tomllib.loads(text)
        return cls.from_dict(data)

    def deviations(self) -> dict:
        """Fields that differ from the published constants."""
        ref = PipelineConfig()
        out = {}
        for k, v in self.to_dict().items():
            if k in PAPER_CONSTANTS and v != getattr(ref, k):
                out[k] = v
        return out


PAPER_CONSTANTS = ("tau_f", "tau_v", "c", "alpha", "t", "refine_iters", "sigma_s", "sigma_d",
                   "sigma_c", "omega", "a", "data_weight")


def paper_defaults() -> PipelineConfig:
    return PipelineConfig()
