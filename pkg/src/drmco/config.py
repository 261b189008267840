"""Experiment configuration (one JSON file per experiment)."""

from __future__ import annotations

import json
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .model import AmbiguitySpec

Grid = Union[float, list[float]]


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


class ProblemConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    name: Literal["inventory_demand", "inventory_price", "hydro"]
    params: dict = Field(default_factory=dict)


class ModelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["nominal", "cvar", "wasserstein", "robust"]
    gamma: Optional[Grid] = None
    alpha: Optional[Grid] = None
    beta: Optional[Grid] = None

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "wasserstein":
            if self.gamma is None:
                raise ValueError("wasserstein model needs gamma")
            if any(g < 0 for g in _as_list(self.gamma)):
                raise ValueError("gamma values must be nonnegative")
        if self.kind == "cvar":
            if self.alpha is None or self.beta is None:
                raise ValueError("cvar model needs alpha and beta")
            if any(not 0 < a < 1 for a in _as_list(self.alpha)):
                raise ValueError("alpha must lie in (0, 1)")
            if any(not 0 <= b <= 1 for b in _as_list(self.beta)):
                raise ValueError("beta must lie in [0, 1]")
        return self


class Seeds(BaseModel):
    model_config = ConfigDict(extra="forbid")
    data: int
    algorithm: int
    evaluation: int


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    problem: ProblemConfig
    models: list[ModelConfig]
    n: int = Field(gt=0)
    eval_paths: int = Field(ge=0)
    epsilon: float = Field(gt=0)
    max_iters: int = Field(gt=0)
    seeds: Seeds
    rel_epsilon: float = Field(default=0.0, ge=0)
    time_cap: Optional[float] = Field(default=None, gt=0)
    forward_mode: Literal["gapmax", "sampled"] = "gapmax"
    radius_basis: Literal["hat", "saa"] = "hat"
    saa_atoms: Optional[int] = Field(default=None, gt=1)
    output_dir: Optional[str] = None

    @field_validator("models")
    @classmethod
    def _nonempty(cls, v):
        if not v:
            raise ValueError("model list must not be empty")
        return v

    @model_validator(mode="after")
    def _saa(self):
        if self.radius_basis == "saa" and self.saa_atoms is None:
            raise ValueError("radius_basis 'saa' needs saa_atoms")
        return self

    def expand_models(self):
        """Concrete ``(label, kind, params)`` triples, one per grid point, in config order."""
        out = []
        for m in self.models:
            if m.kind in ("nominal", "robust"):
                out.append((m.kind, m.kind, {}))
            elif m.kind == "wasserstein":
                for g in _as_list(m.gamma):
                    out.append((f"wasserstein({g:g})", m.kind, {"gamma": float(g)}))
            else:
                for a in _as_list(m.alpha):
                    for b in _as_list(m.beta):
                        out.append((f"cvar({a:g},{b:g})", m.kind, {"alpha": float(a), "beta": float(b)}))
        return out


def ambiguity_for(kind, params, radius_basis_values):
    """Ambiguity specs for stages 2..T given per-stage radius bases ``d_t``."""
    if kind == "wasserstein":
        return [AmbiguitySpec("wasserstein", params["gamma"] * d) for d in radius_basis_values]
    if kind == "cvar":
        return [AmbiguitySpec("cvar", alpha=params["alpha"], beta=params["beta"]) for _ in radius_basis_values]
    return [AmbiguitySpec(kind) for _ in radius_basis_values]


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return parse_config(raw)


def parse_config(raw) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        field = ".".join(str(p) for p in first["loc"])
        raise ConfigError(f"{field}: {first['msg']}", field=field) from None
