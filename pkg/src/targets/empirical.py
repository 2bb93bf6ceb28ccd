"""
src/targets/empirical.py
Finite weighted point sets (training data, augmented data, generated samples).
Exports: EmpiricalMeasure, uniform_measure, measure_to_frame, measure_from_frame, save_measure, load_measure
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from src.common.seeding import make_rng
from src.common.tables import read_csv, write_csv

WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Points (n, d) with probability weights (n,)."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if points.ndim != 2 or points.shape[0] == 0:
            raise ValueError(f"Empirical measure needs a nonempty (n, d) point array, got {points.shape}")
        if weights.shape != (points.shape[0],):
            raise ValueError("Weights must have one entry per point.")
        if not np.all(np.isfinite(points)):
            raise ValueError("Empirical measure points must be finite.")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"Weights must be non-negative and sum to 1 (sum={weights.sum()!r}).")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def is_uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))

    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def subsample(self, n: int, seed: int | np.random.Generator) -> "EmpiricalMeasure":
        """Draw n points by weight (with replacement) as a uniform measure."""
        rng = make_rng(seed)
        index = rng.choice(self.size, size=n, replace=True, p=self.weights)
        return uniform_measure(self.points[index])


def uniform_measure(points: np.ndarray) -> EmpiricalMeasure:
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError(f"Empirical measure needs a nonempty (n, d) point array, got {points.shape}")
    n = points.shape[0]
    return EmpiricalMeasure(points=points, weights=np.full(n, 1.0 / n))


def measure_to_frame(measure: EmpiricalMeasure) -> pd.DataFrame:
    columns = {f"x{i + 1}": measure.points[:, i] for i in range(measure.dim)}
    columns["weight"] = measure.weights
    return pd.DataFrame(columns)


def measure_from_frame(frame: pd.DataFrame) -> EmpiricalMeasure:
    coords = [c for c in frame.columns if c.startswith("x")]
    coords.sort(key=lambda c: int(c[1:]))
    points = frame[coords].to_numpy(dtype=float)
    if "weight" in frame.columns:
        weights = frame["weight"].to_numpy(dtype=float)
        return EmpiricalMeasure(points=points, weights=weights / weights.sum())
    return uniform_measure(points)


def save_measure(measure: EmpiricalMeasure, path: str | Path) -> Path:
    """One point per row: columns x1..xd, weight."""
    return write_csv(measure_to_frame(measure), path)


def load_measure(path: str | Path) -> EmpiricalMeasure:
    return measure_from_frame(read_csv(path))
