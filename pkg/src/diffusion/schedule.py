"""
src/diffusion/schedule.py
Time horizon, early stopping and the reverse-time integration grid.
Exports: DiffusionSchedule, GRID_UNIFORM, GRID_GEOMETRIC
"""

from dataclasses import dataclass

import numpy as np

GRID_UNIFORM = "uniform"
GRID_GEOMETRIC = "geometric"
DEFAULT_HORIZON = 100.0
DEFAULT_EARLY_STOP = 1e-3
DEFAULT_REVERSE_STEPS = 500


@dataclass(frozen=True)
class DiffusionSchedule:
    """Forward time runs over [eps, T]; the reverse SDE is integrated from T down to eps."""

    T: float = DEFAULT_HORIZON
    eps: float = DEFAULT_EARLY_STOP
    n_steps: int = DEFAULT_REVERSE_STEPS
    grid: str = GRID_GEOMETRIC

    def __post_init__(self) -> None:
        if not 0 < self.eps < self.T:
            raise ValueError(f"Schedule needs 0 < eps < T, got eps={self.eps}, T={self.T}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.grid not in {GRID_UNIFORM, GRID_GEOMETRIC}:
            raise ValueError(f"Unknown grid kind: {self.grid}")

    def forward_times(self) -> np.ndarray:
        """Strictly decreasing forward times t_0 = T > t_1 > ... > t_n = eps."""
        if self.grid == GRID_UNIFORM:
            times = np.linspace(self.T, self.eps, self.n_steps + 1)
        else:
            times = self.T * (self.eps / self.T) ** (np.arange(self.n_steps + 1) / self.n_steps)
        times[0], times[-1] = self.T, self.eps
        return times

    def prior_variance(self) -> float:
        """Per-coordinate variance of the N(0, 2T I) reverse-time initial law."""
        return 2.0 * self.T
