"""Experiment configuration: JSON schema, validation, hashing and seed derivation."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

KINDS = ("paradox-cdfs", "bifurcation", "mse-grid", "reactive-compare", "tracking")


class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())


class GraphSpec(_Spec):
    """Base graph, assortativity targets and initial labels.

    ``model`` is "power-law" (configuration model with a truncated power-law
    degree law), "erdos-renyi" or "degree-classes" (configuration model on
    an explicit degree sequence built from ``degrees`` and ``fractions``).
    """

    model: Literal["power-law", "erdos-renyi", "degree-classes"] = "power-law"
    n: int = Field(2000, ge=2)
    alpha: float = Field(2.4, gt=1.0)
    avg_degree: float = Field(50.0, gt=0.0)
    d_min: int = Field(1, ge=1)
    d_max: int | None = Field(None, ge=1)
    degrees: list[int] = Field(default_factory=lambda: [2, 6])
    fractions: list[float] = Field(default_factory=lambda: [0.5, 0.5])
    r_kk: list[float] = Field(default_factory=list)
    p_ks: list[float] = Field(default_factory=lambda: [0.0])
    rho0: float = Field(0.3, ge=0.0, le=1.0)
    rewire_tol: float = Field(0.01, gt=0.0)

    @field_validator("r_kk", "p_ks")
    @classmethod
    def _in_unit(cls, v):
        for x in v:
            if not -1.0 <= x <= 1.0:
                raise ValueError(f"correlation target {x} outside [-1, 1]")
        return v

    @model_validator(mode="after")
    def _check(self):
        if self.d_max is not None and self.d_max < self.d_min:
            raise ValueError("d_max must be >= d_min")
        if self.model == "erdos-renyi" and self.avg_degree >= self.n - 1:
            raise ValueError("avg_degree must be below n - 1")
        if self.model == "degree-classes":
            if len(self.degrees) != len(self.fractions) or not self.degrees:
                raise ValueError("degrees and fractions need equal, nonzero length")
            if any(d < 1 or d >= self.n for d in self.degrees):
                raise ValueError("every class degree must lie in [1, n - 1]")
            if any(f < 0 for f in self.fractions) or abs(sum(self.fractions) - 1) > 1e-9:
                raise ValueError("fractions must be nonnegative and sum to 1")
        if not self.p_ks:
            raise ValueError("p_ks needs at least one target")
        return self


class DynamicsSpec(_Spec):
    nu: float = Field(0.5, ge=0.0, le=1.0)
    delta: float = Field(0.2, gt=0.0, le=1.0)
    rule: Literal["non-monophilic", "monophilic"] = "monophilic"
    activation: Literal["X", "Y", "Z"] = "X"
    neighbor_mode: Literal["unbiased-degree", "graph-neighbors"] = "unbiased-degree"
    sweeps: float = Field(20.0, gt=0.0)
    lambda_min: float = Field(0.0, ge=0.0)
    lambda_max: float = Field(10.0, gt=0.0)
    lambda_points: int = Field(201, ge=2)

    @model_validator(mode="after")
    def _grid(self):
        if self.lambda_max <= self.lambda_min:
            raise ValueError("lambda_max must exceed lambda_min")
        return self


class PollingSpec(_Spec):
    estimators: list[Literal["intent", "UN", "RW", "FN"]] = Field(
        default_factory=lambda: ["intent", "UN", "RW", "FN"], min_length=1)
    budgets: list[int] = Field(default_factory=lambda: [1, 5, 10, 30], min_length=1)
    trials: int = Field(1000, ge=100)
    N: int = Field(1000, ge=0)
    lazy: bool = False
    paired: bool = False

    @field_validator("budgets")
    @classmethod
    def _pos(cls, v):
        if any(b < 1 for b in v):
            raise ValueError("budgets must be positive")
        return v


class TrackingSpec(_Spec):
    samples: int = Field(50, ge=1)
    mode: Literal["uniform", "rds", "census"] = "uniform"
    chain_length: int = Field(10_000, ge=1)
    q_scale: float = Field(1.0, ge=0.0)
    q_kind: Literal["uniform", "census"] = "census"
    substeps: int = Field(10, ge=1)
    prior_var: float = Field(0.05, gt=0.0)
    seeds: int = Field(20, ge=1)


class ReactiveSpec(_Spec):
    targets: list[float] = Field(default_factory=lambda: [-0.3, 0.3], min_length=1)
    P_low: list[list[float]] = Field(default_factory=lambda: [[0.9, 0.1], [0.1, 0.9]])
    P_high: list[list[float]] = Field(default_factory=lambda: [[0.9, 0.1], [0.3, 0.7]])
    c: float = 20.0
    rho0: float = 0.3
    seeds: int = Field(20, ge=1)

    @model_validator(mode="after")
    def _matrices(self):
        N = len(self.targets)
        for name in ("P_low", "P_high"):
            P = np.asarray(getattr(self, name), dtype=float)
            if P.shape != (N, N):
                raise ValueError(f"{name} must be {N}x{N} (one row per target graph)")
            if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1) > 1e-12):
                raise ValueError(f"{name} must be row-stochastic")
        return self


class ExperimentConfig(_Spec):
    kind: Literal["paradox-cdfs", "bifurcation", "mse-grid", "reactive-compare", "tracking"]
    seed: int = Field(0, ge=0)
    output_dir: str = "out"
    graph: GraphSpec = Field(default_factory=GraphSpec)
    dynamics: DynamicsSpec = Field(default_factory=DynamicsSpec)
    polling: PollingSpec = Field(default_factory=PollingSpec)
    tracking: TrackingSpec = Field(default_factory=TrackingSpec)
    reactive: ReactiveSpec = Field(default_factory=ReactiveSpec)

    @model_validator(mode="after")
    def _kind_rules(self):
        if self.kind == "reactive-compare":
            if self.dynamics.rule != "monophilic":
                raise ValueError("reactive-compare needs dynamics.rule = monophilic")
            if self.dynamics.activation != "X":
                raise ValueError("reactive-compare needs dynamics.activation = X")
        return self

    def semantic_dict(self) -> dict:
        """Fields that determine the outputs (everything except where they go)."""
        return self.model_dump(mode="json", exclude={"output_dir"})

    def config_hash(self) -> str:
        blob = json.dumps(self.semantic_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _format_validation(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{loc}: {e['msg']}")
    return "; ".join(lines)


def parse_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_validation(err)) from None


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"<file>: invalid JSON ({err})") from None
    if not isinstance(data, dict):
        raise ConfigError("<root>: config must be a JSON object")
    return parse_config(data)


def child_seed(base_seed: int, kind: str, panel: int, trial: int) -> int:
    """64-bit seed derived from (base seed, experiment kind, panel, trial).

    Uses numpy's SeedSequence hashing with spawn key (kind index, panel,
    trial), so streams for different coordinates are independent.
    """
    ss = np.random.SeedSequence(base_seed, spawn_key=(KINDS.index(kind), panel, trial))
    lo, hi = ss.generate_state(2, np.uint32)
    return int(hi) << 32 | int(lo)


def schema() -> dict:
    return ExperimentConfig.model_json_schema()
