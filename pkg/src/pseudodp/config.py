"""Run configuration schemas.  Unknown keys are rejected before any compute."""
from __future__ import annotations

from pathlib import Path
from typing import List, Literal, Optional, Tuple

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError

SEED_MAX = 2**64 - 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ModelOptions(_Strict):
    model: Literal["poisson", "mixture"]
    input: Path
    response: str
    output: Optional[Path] = None
    seed: int = Field(ge=0, le=SEED_MAX)
    S: int = Field(1000, ge=1)
    burn_in: int = Field(1000, ge=0)
    m: int = Field(20, ge=1)
    # poisson prior
    a0: float = Field(1.0, ge=0)
    b0: float = Field(1.0, ge=0)
    # mixture
    K: int = Field(20, ge=1)
    log_response: bool = False
    refit: bool = True
    seed_policy: Literal["shared", "independent"] = "shared"

    @model_validator(mode="after")
    def _m_fits(self):
        if self.m > self.S:
            raise ValueError(f"m={self.m} exceeds S={self.S}; every database needs its own retained draw")
        return self

    def backend_options(self) -> dict:
        if self.model == "poisson":
            return {"a0": self.a0, "b0": self.b0}
        return {"K": self.K, "log_response": self.log_response}


class RunConfig(ModelOptions):
    mechanism: Literal["Unweighted", "AlphaWeighted", "EmScalar"] = "AlphaWeighted"
    c: float = Field(0.7, gt=0, le=1)
    g: float = 0.0
    M: Optional[float] = Field(None, gt=0)
    epsilon_target: Optional[float] = Field(None, gt=0)
    calibrate: bool = False
    safety_factor: Optional[float] = Field(None, ge=1)

    @model_validator(mode="after")
    def _em_target(self):
        if self.mechanism == "EmScalar" and self.epsilon_target is None:
            raise ValueError("epsilon_target is required for the EmScalar mechanism")
        return self


class StatOption(_Strict):
    kind: Literal["mean", "quantile"] = "mean"
    p: Optional[float] = Field(None, gt=0, lt=1)


class SweepConfig(ModelOptions):
    grid: List[Tuple[float, float]]
    stats: List[StatOption] = [StatOption(kind="mean"), StatOption(kind="quantile", p=0.9)]
    B: int = Field(500, ge=1)

    @field_validator("grid")
    @classmethod
    def _grid(cls, v):
        if not v:
            raise ValueError("grid must be non-empty")
        for c, _ in v:
            if not 0 < c <= 1:
                raise ValueError(f"c must lie in (0, 1], got {c}")
        return v


class ContractionConfig(_Strict):
    ns: List[int] = [100, 400, 1600, 6400]
    R: int = Field(400, ge=1)
    mu: float = Field(100.0, gt=0)
    M: float = Field(3.5, gt=0)
    mechanisms: List[Literal["Unweighted", "Weighted", "WeightedM"]] = ["Unweighted", "Weighted", "WeightedM"]
    seed: int = Field(ge=0, le=SEED_MAX)
    S: int = Field(500, ge=1)
    a0: float = Field(0.01, ge=0)
    b0: float = Field(0.01, ge=0)
    refit: bool = True
    output: Optional[Path] = None

    @field_validator("ns")
    @classmethod
    def _ns(cls, v):
        if not v or any(n < 1 for n in v) or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("ns must be a non-empty, strictly increasing list of positive sizes")
        return v


def _format_error(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def load_mapping(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML/JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a key-value mapping")
    return data


def parse(schema, data: dict, base_dir: Optional[Path] = None):
    try:
        cfg = schema.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_error(exc)) from None
    if base_dir is not None:
        updates = {}
        for key in ("input", "output"):
            p = getattr(cfg, key, None)
            if p is not None and not Path(p).is_absolute():
                updates[key] = base_dir / p
        if updates:
            cfg = cfg.model_copy(update=updates)
    return cfg


def resolved(cfg) -> dict:
    return cfg.model_dump(mode="json")
