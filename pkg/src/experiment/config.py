"""
src/experiment/config.py
Versioned experiment configuration: YAML on disk, pydantic models in memory.
Exports: ExperimentConfig, TargetSpec, GroupSpec, SetupSpec, ModelSpec, ScheduleSpec, OptimizerSpec,
         EvalSpec, SETUPS, load_config, parse_config, dump_config, save_config, config_hash
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.diffusion.losses import WEIGHTING_NOISE
from src.diffusion.model import DEFAULT_HIDDEN_LAYERS, DEFAULT_HIDDEN_WIDTH
from src.diffusion.schedule import (
    DEFAULT_EARLY_STOP,
    DEFAULT_HORIZON,
    DEFAULT_REVERSE_STEPS,
    GRID_GEOMETRIC,
    DiffusionSchedule,
)
from src.diffusion.training import OBJECTIVE_DSM, TrainingHyper
from src.group.rep import GroupRep, group_from_spec
from src.metrics.checks import DEFAULT_INVARIANCE_RESAMPLES
from src.metrics.transport import METHOD_EXACT
from src.ndiff.net import ACTIVATION_SILU
from src.ndiff.optim import DEFAULT_LEARNING_RATE, OPTIMIZER_ADAM
from src.targets.mixture import DEFAULT_COMPONENT_VARIANCE, DEFAULT_CORNER_OFFSET, GaussianMixture, four_corner_mixture

CONFIG_VERSION = 1


class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class TargetSpec(_Spec):
    """`four_corner` uses variance/offset; `custom` uses weights/means/variance."""

    kind: Literal["four_corner", "custom"] = "four_corner"
    variance: float = Field(DEFAULT_COMPONENT_VARIANCE, gt=0)
    offset: float = DEFAULT_CORNER_OFFSET
    weights: list[float] | None = None
    means: list[list[float]] | None = None

    @model_validator(mode="after")
    def _check_mixture(self) -> "TargetSpec":
        self.to_mixture()
        return self

    def to_mixture(self) -> GaussianMixture:
        if self.kind == "four_corner":
            return four_corner_mixture(self.variance, self.offset)
        if self.weights is None or self.means is None:
            raise ValueError("A custom target needs both weights and means.")
        return GaussianMixture(weights=np.array(self.weights), means=np.array(self.means), variance=self.variance)


class GroupSpec(_Spec):
    kind: Literal["cyclic", "dihedral", "trivial", "matrices"] = "cyclic"
    k: int = Field(4, ge=1)
    dim: int = Field(2, ge=1)
    matrices: list[list[list[float]]] | None = None

    @model_validator(mode="after")
    def _check_group(self) -> "GroupSpec":
        self.to_rep()
        return self

    def to_rep(self) -> GroupRep:
        return group_from_spec(self.model_dump())


class SetupSpec(_Spec):
    equivariant: bool = False
    augmented: bool = False

    @property
    def name(self) -> str:
        return SETUP_NAMES[(self.equivariant, self.augmented)]


class ModelSpec(_Spec):
    hidden_width: int = Field(DEFAULT_HIDDEN_WIDTH, ge=1)
    hidden_layers: int = Field(DEFAULT_HIDDEN_LAYERS, ge=1)
    activation: Literal["silu", "relu", "identity"] = ACTIVATION_SILU


class ScheduleSpec(_Spec):
    T: float = DEFAULT_HORIZON
    eps: float = DEFAULT_EARLY_STOP
    n_steps: int = DEFAULT_REVERSE_STEPS
    grid: Literal["uniform", "geometric"] = GRID_GEOMETRIC

    @model_validator(mode="after")
    def _check_schedule(self) -> "ScheduleSpec":
        self.to_schedule()
        return self

    def to_schedule(self) -> DiffusionSchedule:
        return DiffusionSchedule(T=self.T, eps=self.eps, n_steps=self.n_steps, grid=self.grid)


class OptimizerSpec(_Spec):
    kind: Literal["adam", "sgd"] = OPTIMIZER_ADAM
    learning_rate: float = Field(DEFAULT_LEARNING_RATE, gt=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)

    def to_hyper(self) -> TrainingHyper:
        return TrainingHyper(
            kind=self.kind, learning_rate=self.learning_rate, beta1=self.beta1, beta2=self.beta2, eps=self.eps
        )


class EvalSpec(_Spec):
    n_gen_samples: int = Field(1024, ge=1)
    n_ref_samples: int = Field(1024, ge=1)
    w1_method: Literal["exact-flow", "neural-dual"] = METHOD_EXACT
    critic_iterations: int = Field(2000, ge=1)
    invariance_resamples: int = Field(DEFAULT_INVARIANCE_RESAMPLES, ge=1)
    dfe_points: int = Field(256, ge=1)


class ExperimentConfig(_Spec):
    version: Literal[1] = CONFIG_VERSION
    target: TargetSpec = TargetSpec()
    group: GroupSpec = GroupSpec()
    setup: SetupSpec = SetupSpec()
    model: ModelSpec = ModelSpec()
    n_training: int = Field(100, ge=1)
    objective: Literal["dsm", "ism", "esm"] = OBJECTIVE_DSM
    weighting: Literal["noise", "uniform"] = WEIGHTING_NOISE
    iterations: int = Field(10_000, ge=0)
    batch_size: int = Field(32, ge=1)
    schedule: ScheduleSpec = ScheduleSpec()
    optimizer: OptimizerSpec = OptimizerSpec()
    n_runs: int = Field(10, ge=1)
    base_seed: int = Field(0, ge=0)
    eval: EvalSpec = EvalSpec()

    @model_validator(mode="after")
    def _check_dims(self) -> "ExperimentConfig":
        target_dim = self.target.to_mixture().dim
        group_dim = self.group.to_rep().dim
        if target_dim != group_dim:
            raise ValueError(f"Group acts on R^{group_dim} but the target lives in R^{target_dim}.")
        return self

    def with_cell(self, n_training: int, setup: SetupSpec) -> "ExperimentConfig":
        return self.model_copy(update={"n_training": n_training, "setup": setup})


SETUP_NAMES = {
    (False, False): "plain",
    (False, True): "augmented",
    (True, False): "equivariant",
    (True, True): "equivariant+augmented",
}
# Grid order: non-equivariant setups first.
SETUPS = (
    SetupSpec(equivariant=False, augmented=False),
    SetupSpec(equivariant=False, augmented=True),
    SetupSpec(equivariant=True, augmented=False),
    SetupSpec(equivariant=True, augmented=True),
)


def parse_config(data: dict[str, Any]) -> ExperimentConfig:
    """Validate a mapping; pydantic's ValidationError is a ValueError."""
    return ExperimentConfig.model_validate(data)


def load_config(path: str | Path) -> ExperimentConfig:
    with Path(path).open(encoding="utf-8") as handle:
        data = yaml.safe_load(handle) or {}
    if not isinstance(data, dict):
        raise ValueError(f"Config file {path} must contain a mapping at the top level.")
    return parse_config(data)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False)


def save_config(cfg: ExperimentConfig, path: str | Path) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(dump_config(cfg), encoding="utf-8")
    return target


def config_hash(cfg: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON form."""
    canonical = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
