"""
src/ndiff/divergence.py
Exact divergence of a net's spatial output by forward-mode passes, one per coordinate axis.
Exports: divergence, divergence_batch, divergence_graph
"""

import numpy as np

from src.ndiff.graph import Node, add, net_jvp_graph, take_column
from src.ndiff.net import DenseNet, activate, activation_slope


def _check_widths(net: DenseNet, dim: int, n_features: int) -> None:
    if net.output_width != dim or net.input_width != dim + n_features:
        raise ValueError(
            f"Net widths {net.input_width}->{net.output_width} do not match "
            f"d={dim} with {n_features} time features."
        )


def divergence_batch(net: DenseNet, points: np.ndarray, t_features: np.ndarray) -> np.ndarray:
    """
    Sum_i ds_i/dx_i at each row of `points`, with time features held fixed.

    Args:
        net: Net mapping (x, time features) to R^d.
        points: (n, d) spatial inputs.
        t_features: (n, f) time features.
    Returns:
        (n,) divergences.
    """
    points = np.asarray(points, dtype=float)
    t_features = np.asarray(t_features, dtype=float)
    n, dim = points.shape
    _check_widths(net, dim, t_features.shape[1])
    h = np.concatenate([points, t_features], axis=1)
    tangents = []
    for i in range(dim):
        v = np.zeros_like(h)
        v[:, i] = 1.0
        tangents.append(v)
    last = net.n_layers - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w.T + b
        tangents = [v @ w.T for v in tangents]
        if k < last:
            slope = activation_slope(z, net.activation)
            tangents = [slope * v for v in tangents]
            h = activate(z, net.activation)
    total = np.zeros(n)
    for i, v in enumerate(tangents):
        total += v[:, i]
    return total


def divergence(net: DenseNet, x: np.ndarray, t_features: np.ndarray) -> float:
    """Divergence at a single point."""
    x = np.asarray(x, dtype=float)
    t_features = np.asarray(t_features, dtype=float)
    return float(divergence_batch(net, x[None, :], t_features[None, :])[0])


def divergence_graph(
    net: DenseNet, points: np.ndarray, t_features: np.ndarray
) -> tuple[Node, Node]:
    """
    Net output and its divergence as graph nodes, both differentiable in the parameters.

    Returns:
        (output node of shape (n, d), divergence node of shape (n,)).
    """
    points = np.asarray(points, dtype=float)
    t_features = np.asarray(t_features, dtype=float)
    n, dim = points.shape
    _check_widths(net, dim, t_features.shape[1])
    inputs = np.concatenate([points, t_features], axis=1)
    tangents = []
    for i in range(dim):
        v = np.zeros_like(inputs)
        v[:, i] = 1.0
        tangents.append(v)
    out, directional = net_jvp_graph(net, inputs, tangents)
    total = take_column(directional[0], 0)
    for i in range(1, dim):
        total = add(total, take_column(directional[i], i))
    return out, total
