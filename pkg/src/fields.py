"""
src/fields.py
Time-dependent vector fields s(x, t) on R^d and the space-time evaluation sets they are scored on.
Exports: VectorField, SpaceTimeSample, AnalyticScoreField, ConstantField, LinearField
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable

import numpy as np

from src.ndiff.graph import Node, constant
from src.ndiff.net import DenseNet
from src.targets.mixture import GaussianMixture, mixture_score, mixture_score_divergence


@dataclass(frozen=True, eq=False)
class SpaceTimeSample:
    """Weighted (point, time) pairs; weights need not be normalized."""

    points: np.ndarray
    times: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=float)
        times = np.asarray(self.times, dtype=float).reshape(-1)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if points.ndim != 2 or points.shape[0] == 0:
            raise ValueError("Space-time sample needs a nonempty (n, d) point array.")
        if times.shape != (points.shape[0],) or weights.shape != times.shape:
            raise ValueError("Times and weights must have one entry per point.")
        if np.any(weights < 0) or weights.sum() <= 0:
            raise ValueError("Space-time weights must be non-negative with positive total.")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @classmethod
    def uniform(cls, points: np.ndarray, times: np.ndarray) -> "SpaceTimeSample":
        points = np.asarray(points, dtype=float)
        return cls(points=points, times=times, weights=np.ones(points.shape[0]))


class VectorField(ABC):
    """A vector field s(x, t); rows of `points` pair with entries of `times`."""

    dim: int

    @abstractmethod
    def evaluate(self, points: np.ndarray, times: np.ndarray) -> np.ndarray:
        """Field values, shape (n, d)."""

    @abstractmethod
    def divergence(self, points: np.ndarray, times: np.ndarray) -> np.ndarray:
        """Spatial divergence, shape (n,)."""

    def forward(self, points: np.ndarray, times: np.ndarray) -> Node:
        """Field values as a graph node (constant unless the field has trainable parameters)."""
        return constant(self.evaluate(points, times))

    def forward_with_divergence(self, points: np.ndarray, times: np.ndarray) -> tuple[Node, Node]:
        return constant(self.evaluate(points, times)), constant(self.divergence(points, times))

    def trainable_net(self) -> DenseNet | None:
        """The net whose parameters the graph nodes depend on, if any."""
        return None

    def __call__(self, points: np.ndarray, times: np.ndarray) -> np.ndarray:
        return self.evaluate(points, times)


def _by_time(times: np.ndarray) -> dict[float, np.ndarray]:
    groups: dict[float, list[int]] = {}
    for index, t in enumerate(np.asarray(times, dtype=float).reshape(-1)):
        groups.setdefault(float(t), []).append(index)
    return {t: np.asarray(rows) for t, rows in groups.items()}


class AnalyticScoreField(VectorField):
    """Exact score of a time-indexed mixture family, e.g. t -> diffuse(target, t)."""

    def __init__(self, target_at_time: Callable[[float], GaussianMixture], dim: int) -> None:
        self.target_at_time = target_at_time
        self.dim = dim

    def evaluate(self, points: np.ndarray, times: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        out = np.empty_like(points)
        for t, rows in _by_time(times).items():
            out[rows] = mixture_score(self.target_at_time(t), points[rows])
        return out

    def divergence(self, points: np.ndarray, times: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        out = np.empty(points.shape[0])
        for t, rows in _by_time(times).items():
            out[rows] = mixture_score_divergence(self.target_at_time(t), points[rows])
        return out


class ConstantField(VectorField):
    """s(x, t) = c."""

    def __init__(self, value: np.ndarray) -> None:
        self.value = np.asarray(value, dtype=float)
        self.dim = self.value.shape[0]

    def evaluate(self, points: np.ndarray, times: np.ndarray) -> np.ndarray:
        n = np.asarray(points).shape[0]
        return np.tile(self.value, (n, 1))

    def divergence(self, points: np.ndarray, times: np.ndarray) -> np.ndarray:
        return np.zeros(np.asarray(points).shape[0])


class LinearField(VectorField):
    """s(x, t) = M x; the identity field is LinearField(np.eye(d))."""

    def __init__(self, matrix: np.ndarray) -> None:
        self.matrix = np.asarray(matrix, dtype=float)
        self.dim = self.matrix.shape[0]

    def evaluate(self, points: np.ndarray, times: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.matrix.T

    def divergence(self, points: np.ndarray, times: np.ndarray) -> np.ndarray:
        return np.full(np.asarray(points).shape[0], float(np.trace(self.matrix)))
