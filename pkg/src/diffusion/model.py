"""
src/diffusion/model.py
Score models: a dense net fed (x, time features), optionally wrapped to be G-equivariant.
Exports: TimeFeaturizer, NetField, ScoreModel, build_score_model, VARIANT_PLAIN, VARIANT_EQUIVARIANT
"""

from dataclasses import dataclass

import numpy as np

from src.diffusion.schedule import DiffusionSchedule
from src.fields import VectorField
from src.group.rep import GroupRep
from src.group.symmetrize import EquivariantWrapper
from src.ndiff.divergence import divergence_batch, divergence_graph
from src.ndiff.graph import Node, net_forward_graph
from src.ndiff.net import ACTIVATION_SILU, DenseNet, forward_batch, net_init

VARIANT_PLAIN = "plain"
VARIANT_EQUIVARIANT = "equivariant"
N_TIME_FEATURES = 2
DEFAULT_HIDDEN_WIDTH = 32
DEFAULT_HIDDEN_LAYERS = 3


@dataclass(frozen=True)
class TimeFeaturizer:
    """t -> (t/T, log(t + eps)/log T); the log denominator is floored at 1 in magnitude."""

    T: float
    eps: float

    def __call__(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float).reshape(-1)
        log_scale = np.log(self.T)
        if abs(log_scale) < 1.0:
            log_scale = 1.0
        return np.stack([times / self.T, np.log(times + self.eps) / log_scale], axis=1)


class NetField(VectorField):
    """A dense net read as a vector field; the net sees [x, features(t)]."""

    def __init__(self, net: DenseNet, featurizer: TimeFeaturizer) -> None:
        if net.input_width != net.output_width + N_TIME_FEATURES:
            raise ValueError(
                f"Score net must map d + {N_TIME_FEATURES} inputs to d outputs, got {list(net.widths)}"
            )
        self.net = net
        self.featurizer = featurizer
        self.dim = net.output_width

    def _inputs(self, points: np.ndarray, times: np.ndarray) -> np.ndarray:
        return np.concatenate([np.asarray(points, dtype=float), self.featurizer(times)], axis=1)

    def evaluate(self, points: np.ndarray, times: np.ndarray) -> np.ndarray:
        return forward_batch(self.net, self._inputs(points, times))

    def divergence(self, points: np.ndarray, times: np.ndarray) -> np.ndarray:
        return divergence_batch(self.net, points, self.featurizer(times))

    def forward(self, points: np.ndarray, times: np.ndarray) -> Node:
        return net_forward_graph(self.net, self._inputs(points, times))

    def forward_with_divergence(self, points: np.ndarray, times: np.ndarray) -> tuple[Node, Node]:
        return divergence_graph(self.net, points, self.featurizer(times))

    def trainable_net(self) -> DenseNet:
        return self.net


class ScoreModel(VectorField):
    """s_theta (plain) or its group average s^G_theta (equivariant)."""

    def __init__(
        self,
        net: DenseNet,
        featurizer: TimeFeaturizer,
        variant: str = VARIANT_PLAIN,
        group: GroupRep | None = None,
    ) -> None:
        if variant not in {VARIANT_PLAIN, VARIANT_EQUIVARIANT}:
            raise ValueError(f"Unknown score model variant: {variant}")
        if variant == VARIANT_EQUIVARIANT and group is None:
            raise ValueError("An equivariant score model needs a group.")
        self.net = net
        self.featurizer = featurizer
        self.variant = variant
        self.group = group
        self.dim = net.output_width
        plain = NetField(net, featurizer)
        self._field: VectorField = plain if variant == VARIANT_PLAIN else EquivariantWrapper(plain, group)

    @property
    def is_equivariant(self) -> bool:
        return self.variant == VARIANT_EQUIVARIANT

    def with_net(self, net: DenseNet) -> "ScoreModel":
        return ScoreModel(net, self.featurizer, self.variant, self.group)

    def plain_field(self) -> NetField:
        """The unwrapped s_theta, regardless of variant."""
        return NetField(self.net, self.featurizer)

    def evaluate(self, points: np.ndarray, times: np.ndarray) -> np.ndarray:
        return self._field.evaluate(points, times)

    def divergence(self, points: np.ndarray, times: np.ndarray) -> np.ndarray:
        return self._field.divergence(points, times)

    def forward(self, points: np.ndarray, times: np.ndarray) -> Node:
        return self._field.forward(points, times)

    def forward_with_divergence(self, points: np.ndarray, times: np.ndarray) -> tuple[Node, Node]:
        return self._field.forward_with_divergence(points, times)

    def trainable_net(self) -> DenseNet:
        return self.net


def build_score_model(
    dim: int,
    schedule: DiffusionSchedule,
    *,
    equivariant: bool = False,
    group: GroupRep | None = None,
    hidden_width: int = DEFAULT_HIDDEN_WIDTH,
    hidden_layers: int = DEFAULT_HIDDEN_LAYERS,
    activation: str = ACTIVATION_SILU,
    seed: int = 0,
) -> ScoreModel:
    """Fresh score model with widths [d + 2, hidden x layers, d]."""
    widths = [dim + N_TIME_FEATURES, *([hidden_width] * hidden_layers), dim]
    net = net_init(widths, activation, seed)
    return ScoreModel(
        net,
        TimeFeaturizer(T=schedule.T, eps=schedule.eps),
        VARIANT_EQUIVARIANT if equivariant else VARIANT_PLAIN,
        group,
    )
