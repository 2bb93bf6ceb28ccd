"""
src/diffusion/sampler.py
Euler-Maruyama integration of the reverse-time SDE with early stopping.
Exports: sample_reverse
"""

import logging

import numpy as np

from src.common.errors import SamplerDivergedError
from src.common.seeding import make_rng
from src.diffusion.schedule import DiffusionSchedule
from src.fields import VectorField
from src.targets.empirical import EmpiricalMeasure, uniform_measure

logger = logging.getLogger(__name__)


def sample_reverse(
    model: VectorField, schedule: DiffusionSchedule, n: int, seed: int | np.random.Generator
) -> EmpiricalMeasure:
    """
    Draw n points by running dy = 2 s(y, t) dt + sqrt(2) dW backwards from t = T to t = eps.

    The state starts from N(0, 2T I); each step evaluates the score at the
    step's starting (larger) forward time.

    Raises:
        ValueError: n < 1.
        SamplerDivergedError: The state became non-finite.
    """
    if n < 1:
        raise ValueError(f"Sample count must be >= 1, got {n}")
    rng = make_rng(seed)
    times = schedule.forward_times()
    y = np.sqrt(schedule.prior_variance()) * rng.standard_normal((n, model.dim))
    for step in range(schedule.n_steps):
        t, dt = times[step], times[step] - times[step + 1]
        drift = model.evaluate(y, np.full(n, t))
        y = y + 2.0 * drift * dt + np.sqrt(2.0 * dt) * rng.standard_normal(y.shape)
        if not np.all(np.isfinite(y)):
            logger.warning("Reverse sampler diverged at step %d (t=%g)", step, t)
            raise SamplerDivergedError(step)
    logger.debug("Sampled %d points over %d reverse steps", n, schedule.n_steps)
    return uniform_measure(y)
