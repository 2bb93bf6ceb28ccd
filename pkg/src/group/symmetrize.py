"""
src/group/symmetrize.py
Group averaging of functions, empirical measures (data augmentation) and vector fields,
plus the deviation-from-equivariance functional.
Exports: symmetrize_function, augment, augment_space_time, EquivariantWrapper, equivariant_wrap, dfe
"""

from typing import Callable

import numpy as np

from src.common.errors import NonFiniteError
from src.fields import SpaceTimeSample, VectorField
from src.group.rep import GroupRep
from src.ndiff.graph import Node, block_mean, group_average_rows
from src.ndiff.net import DenseNet
from src.targets.empirical import EmpiricalMeasure


def _check_dim(rep: GroupRep, dim: int) -> None:
    if rep.dim != dim:
        raise ValueError(f"Group acts on R^{rep.dim} but points live in R^{dim}.")


def symmetrize_function(rep: GroupRep, gamma: Callable[[np.ndarray], float], x: np.ndarray) -> float:
    """
    (1/|G|) sum_g gamma(A_g x).

    Raises:
        NonFiniteError: gamma is not finite somewhere on the orbit of x.
    """
    x = np.asarray(x, dtype=float)
    _check_dim(rep, x.shape[0])
    values = np.array([float(gamma(a @ x)) for a in rep.elements])
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(f"Function is not finite on the orbit of {x.tolist()}.")
    return float(values.sum() / rep.order)


def augment(data: EmpiricalMeasure, rep: GroupRep) -> EmpiricalMeasure:
    """
    Orbit-average of an empirical measure: |G| N points A_g z_i, each weight w_i/|G|.

    Points are ordered element-major (all of A_0 z, then all of A_1 z, ...).
    """
    _check_dim(rep, data.dim)
    if rep.order == 1:
        return data
    points = np.concatenate([data.points @ a.T for a in rep.elements], axis=0)
    weights = np.tile(data.weights / rep.order, rep.order)
    return EmpiricalMeasure(points=points, weights=weights)


def augment_space_time(sample: SpaceTimeSample, rep: GroupRep) -> SpaceTimeSample:
    """G.P: every (x, t, w) becomes (A_g x, t, w/|G|) for all g, element-major."""
    _check_dim(rep, sample.points.shape[1])
    points = np.concatenate([sample.points @ a.T for a in rep.elements], axis=0)
    return SpaceTimeSample(
        points=points,
        times=np.tile(sample.times, rep.order),
        weights=np.tile(sample.weights / rep.order, rep.order),
    )


class EquivariantWrapper(VectorField):
    """s^G(x, t) = (1/|G|) sum_g A_g^T base(A_g x, t), summed in element order."""

    def __init__(self, base: VectorField, rep: GroupRep) -> None:
        _check_dim(rep, base.dim)
        self.base = base
        self.group = rep
        self.dim = base.dim

    def _stack(self, points: np.ndarray, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        points = np.asarray(points, dtype=float)
        times = np.asarray(times, dtype=float).reshape(-1)
        moved = np.concatenate([points @ a.T for a in self.group.elements], axis=0)
        return moved, np.tile(times, self.group.order)

    def evaluate(self, points: np.ndarray, times: np.ndarray) -> np.ndarray:
        moved, tiled = self._stack(points, times)
        values = self.base.evaluate(moved, tiled)
        n = np.asarray(points).shape[0]
        out = np.zeros((n, self.dim))
        for g, a in enumerate(self.group.elements):
            out += values[g * n : (g + 1) * n] @ a
        return out / self.group.order

    def divergence(self, points: np.ndarray, times: np.ndarray) -> np.ndarray:
        # tr(A^T J A) = tr(J): the wrapped divergence is the orbit mean of the base divergence.
        moved, tiled = self._stack(points, times)
        values = self.base.divergence(moved, tiled)
        return values.reshape(self.group.order, -1).mean(axis=0)

    def forward(self, points: np.ndarray, times: np.ndarray) -> Node:
        moved, tiled = self._stack(points, times)
        return group_average_rows(self.base.forward(moved, tiled), self.group.elements)

    def forward_with_divergence(self, points: np.ndarray, times: np.ndarray) -> tuple[Node, Node]:
        moved, tiled = self._stack(points, times)
        values, div = self.base.forward_with_divergence(moved, tiled)
        return group_average_rows(values, self.group.elements), block_mean(div, self.group.order)

    def trainable_net(self) -> DenseNet | None:
        return self.base.trainable_net()


def equivariant_wrap(base: VectorField, rep: GroupRep) -> EquivariantWrapper:
    return EquivariantWrapper(base, rep)


def dfe(field: VectorField, rep: GroupRep, samples: SpaceTimeSample) -> float:
    """
    Weighted mean of |s - S_G^E[s]|^2 over a space-time sample.

    The sample should come from a G-invariant space-time measure; pass
    `augment_space_time(...)` output to guarantee it.
    """
    if samples.size == 0:
        raise ValueError("DFE needs a nonempty sample.")
    gap = field.evaluate(samples.points, samples.times) - EquivariantWrapper(field, rep).evaluate(
        samples.points, samples.times
    )
    sq = np.sum(gap * gap, axis=1)
    return float(samples.weights @ sq / samples.weights.sum())
