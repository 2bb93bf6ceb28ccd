"""
src/diffusion/training.py
Minibatch training of a ScoreModel against DSM, ISM or ESM.
Exports: train, TrainRecord, TrainingHyper, OBJECTIVE_DSM, OBJECTIVE_ISM, OBJECTIVE_ESM
"""

import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from src.common.errors import NonFiniteError, TrainingDivergedError
from src.common.seeding import make_rng
from src.diffusion.losses import WEIGHTING_NOISE, dsm_batch_loss, draw_dsm_batch, esm_loss, ism_loss
from src.diffusion.model import ScoreModel
from src.diffusion.schedule import DiffusionSchedule
from src.ndiff.checkpoint import save_checkpoint
from src.ndiff.graph import Node, loss_backward
from src.ndiff.optim import DEFAULT_LEARNING_RATE, OPTIMIZER_ADAM, init_optimizer, optimizer_step
from src.targets.empirical import EmpiricalMeasure
from src.targets.mixture import GaussianMixture, diffuse, mixture_sample, mollify_empirical

logger = logging.getLogger(__name__)

OBJECTIVE_DSM = "dsm"
OBJECTIVE_ISM = "ism"
OBJECTIVE_ESM = "esm"
OBJECTIVES = {OBJECTIVE_DSM, OBJECTIVE_ISM, OBJECTIVE_ESM}
LOG_EVERY = 500


@dataclass(frozen=True)
class TrainingHyper:
    """Optimizer settings used to build a fresh OptimizerState per run."""

    kind: str = OPTIMIZER_ADAM
    learning_rate: float = DEFAULT_LEARNING_RATE
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class TrainRecord:
    losses: tuple[float, ...]
    wall_clock: float
    checkpoint: Path | None
    config_hash: str
    seed: int

    @property
    def iterations(self) -> int:
        return len(self.losses)

    @property
    def final_loss(self) -> float | None:
        return self.losses[-1] if self.losses else None


def _esm_target(source: EmpiricalMeasure | GaussianMixture):
    # A data set is scored against its heat-diffused empirical law.
    if isinstance(source, GaussianMixture):
        return lambda t: diffuse(source, t)
    return lambda t: mollify_empirical(source, t)


def _batch_loss(
    model: ScoreModel,
    objective: str,
    source: EmpiricalMeasure | GaussianMixture,
    schedule: DiffusionSchedule,
    batch_size: int,
    rng: np.random.Generator,
    weighting: str,
) -> Node:
    data = mixture_sample(source, batch_size, rng) if isinstance(source, GaussianMixture) else source
    batch = draw_dsm_batch(data, schedule, batch_size, rng, weighting)
    if objective == OBJECTIVE_DSM:
        return dsm_batch_loss(model, batch)
    if objective == OBJECTIVE_ISM:
        return ism_loss(model, batch.space_time())
    return esm_loss(model, _esm_target(source), batch.space_time())


def train(
    model: ScoreModel,
    objective: str,
    source: EmpiricalMeasure | GaussianMixture,
    schedule: DiffusionSchedule,
    hyper: TrainingHyper,
    iterations: int,
    batch_size: int,
    seed: int,
    weighting: str = WEIGHTING_NOISE,
    *,
    config_hash: str = "",
    checkpoint_path: str | Path | None = None,
) -> tuple[ScoreModel, TrainRecord]:
    """
    Run `iterations` optimizer steps and return the trained model with its loss trace.

    Args:
        model: Plain or equivariant score model; only its base net is updated.
        objective: "dsm", "ism" or "esm".
        source: Training data, or an analytic mixture sampled afresh each step.
        schedule: Time range for t-sampling.
        hyper: Optimizer settings.
        iterations: Number of steps (0 returns the model unchanged).
        batch_size: Samples per step.
        seed: Seed for every random draw of the run.
        weighting: DSM/ISM/ESM time weighting, "noise" or "uniform".
        config_hash: Echoed into the record.
        checkpoint_path: When set, the final net is written there.
    Returns:
        (trained model, TrainRecord)
    Raises:
        ValueError: Unknown objective, iterations < 0 or a dimension mismatch.
        TrainingDivergedError: Loss or gradients went non-finite.
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"Unknown training objective: {objective}")
    if iterations < 0:
        raise ValueError(f"iterations must be >= 0, got {iterations}")
    source_dim = source.dim
    if source_dim != model.dim:
        raise ValueError(f"Model is {model.dim}-dimensional but the training source is {source_dim}-dimensional.")

    rng = make_rng(seed)
    state = init_optimizer(model.net, hyper.kind, hyper.learning_rate, hyper.beta1, hyper.beta2, hyper.eps)
    losses: list[float] = []
    started = time.perf_counter()
    for iteration in range(iterations):
        try:
            loss = _batch_loss(model, objective, source, schedule, batch_size, rng, weighting)
            tape = loss_backward(model.net, loss)
            net, state = optimizer_step(model.net, tape, state)
        except NonFiniteError as exc:
            logger.warning("Training diverged at iteration %d: %s", iteration, exc)
            raise TrainingDivergedError(iteration, str(exc)) from exc
        model = model.with_net(net)
        losses.append(tape.loss)
        if (iteration + 1) % LOG_EVERY == 0:
            logger.debug("%s iteration %d loss=%.6g", objective, iteration + 1, tape.loss)
    wall_clock = time.perf_counter() - started

    saved: Path | None = None
    if checkpoint_path is not None:
        try:
            saved = save_checkpoint(model.net, checkpoint_path)
        except OSError:
            logger.exception("Failed to write checkpoint to %s", checkpoint_path)
    logger.info(
        "Trained %s model with %s for %d iterations in %.2fs", model.variant, objective, iterations, wall_clock
    )
    return model, TrainRecord(
        losses=tuple(losses), wall_clock=wall_clock, checkpoint=saved, config_hash=config_hash, seed=seed
    )
