"""
src/ndiff/graph.py
Reverse-mode differentiation over numpy arrays, sized for the score-matching and critic losses.
Exports: Node, GradientTape, constant, as_node, add, sub, mul, scale, square, matmul_const,
         linear, activation, activation_prime, take_column, sum_rows, mean, weighted_mean,
         group_average_rows, block_mean, net_forward_graph, net_jvp_graph, loss_backward
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from src.common.errors import NonFiniteError
from src.ndiff.net import DenseNet, activate, activation_curvature, activation_slope

Vjp = Callable[[np.ndarray], np.ndarray]


class Node:
    """One value in a loss graph; parents carry vector-Jacobian closures."""

    __slots__ = ("value", "parents", "param", "requires_grad")

    def __init__(
        self,
        value: np.ndarray,
        parents: tuple[tuple["Node", Vjp], ...] = (),
        param: tuple[DenseNet, int] | None = None,
    ) -> None:
        self.value = np.asarray(value, dtype=float)
        # Constant branches are dropped so backward never visits them.
        self.parents = tuple((p, vjp) for p, vjp in parents if p.requires_grad)
        # (owning net, flat parameter index) for parameter leaves.
        self.param = param
        self.requires_grad = param is not None or bool(self.parents)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def __add__(self, other: "Node | np.ndarray | float") -> "Node":
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other: "Node | np.ndarray | float") -> "Node":
        return sub(self, other)

    def __rsub__(self, other: "Node | np.ndarray | float") -> "Node":
        return sub(other, self)

    def __mul__(self, other: "Node | np.ndarray | float") -> "Node":
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self) -> "Node":
        return scale(self, -1.0)

    def __matmul__(self, other: np.ndarray) -> "Node":
        return matmul_const(self, other)

    def __repr__(self) -> str:
        return f"Node(shape={self.shape})"


@dataclass(frozen=True, eq=False)
class GradientTape:
    """Gradients of a scalar loss, shaped like the net's weights and biases."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    loss: float

    def parameters(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]


def constant(value: np.ndarray | float) -> Node:
    return Node(np.asarray(value, dtype=float))


def as_node(value: "Node | np.ndarray | float") -> Node:
    return value if isinstance(value, Node) else constant(value)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a: "Node | np.ndarray | float", b: "Node | np.ndarray | float") -> Node:
    a, b = as_node(a), as_node(b)
    return Node(
        a.value + b.value,
        (
            (a, lambda g: _unbroadcast(g, a.shape)),
            (b, lambda g: _unbroadcast(g, b.shape)),
        ),
    )


def sub(a: "Node | np.ndarray | float", b: "Node | np.ndarray | float") -> Node:
    a, b = as_node(a), as_node(b)
    return Node(
        a.value - b.value,
        (
            (a, lambda g: _unbroadcast(g, a.shape)),
            (b, lambda g: _unbroadcast(-g, b.shape)),
        ),
    )


def mul(a: "Node | np.ndarray | float", b: "Node | np.ndarray | float") -> Node:
    a, b = as_node(a), as_node(b)
    return Node(
        a.value * b.value,
        (
            (a, lambda g: _unbroadcast(g * b.value, a.shape)),
            (b, lambda g: _unbroadcast(g * a.value, b.shape)),
        ),
    )


def scale(a: Node, factor: float) -> Node:
    return Node(a.value * factor, ((a, lambda g: g * factor),))


def square(a: Node) -> Node:
    return Node(a.value * a.value, ((a, lambda g: 2.0 * g * a.value),))


def matmul_const(a: Node, m: np.ndarray) -> Node:
    """Right-multiply rows of `a` by a constant matrix."""
    m = np.asarray(m, dtype=float)
    return Node(a.value @ m, ((a, lambda g: g @ m.T),))


def linear(x: "Node | np.ndarray", w: Node, b: Node | None = None) -> Node:
    """Rows of x mapped through x @ w.T (+ b)."""
    x = as_node(x)
    out = x.value @ w.value.T
    parents: list[tuple[Node, Vjp]] = [
        (x, lambda g: g @ w.value),
        (w, lambda g: g.T @ x.value),
    ]
    if b is not None:
        out = out + b.value
        parents.append((b, lambda g: g.sum(axis=0)))
    return Node(out, tuple(parents))


def activation(z: Node, kind: str) -> Node:
    slope = activation_slope(z.value, kind)
    return Node(activate(z.value, kind), ((z, lambda g: g * slope),))


def activation_prime(z: Node, kind: str) -> Node:
    """Node for the activation's first derivative, itself differentiable."""
    curvature = activation_curvature(z.value, kind)
    return Node(activation_slope(z.value, kind), ((z, lambda g: g * curvature),))


def take_column(a: Node, index: int) -> Node:
    def vjp(g: np.ndarray) -> np.ndarray:
        out = np.zeros_like(a.value)
        out[:, index] = g
        return out

    return Node(a.value[:, index], ((a, vjp),))


def sum_rows(a: Node) -> Node:
    """Sum across columns, giving one value per row."""
    return Node(a.value.sum(axis=1), ((a, lambda g: np.broadcast_to(g[:, None], a.shape).copy()),))


def mean(a: Node) -> Node:
    n = a.value.size
    return Node(a.value.mean(), ((a, lambda g: np.full(a.shape, float(g) / n)),))


def weighted_mean(a: Node, weights: np.ndarray) -> Node:
    """Weighted average of a vector node; weights are normalized to sum 1."""
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    return Node(float(a.value @ w), ((a, lambda g: float(g) * w),))


def group_average_rows(a: Node, matrices: tuple[np.ndarray, ...]) -> Node:
    """
    Rows of `a` come in len(matrices) equal blocks; return mean_g block_g @ M_g.

    Used for (1/|G|) sum_g A_g^T s(A_g x) with row vectors, where M_g = A_g.
    """
    n_blocks = len(matrices)
    n = a.shape[0] // n_blocks
    out = np.zeros((n, matrices[0].shape[1]))
    for g, m in enumerate(matrices):
        out += a.value[g * n : (g + 1) * n] @ m
    out /= n_blocks

    def vjp(grad: np.ndarray) -> np.ndarray:
        return np.concatenate([grad @ m.T for m in matrices], axis=0) / n_blocks

    return Node(out, ((a, vjp),))


def block_mean(a: Node, n_blocks: int) -> Node:
    """Average a length n_blocks*n vector over its equal blocks."""
    n = a.shape[0] // n_blocks
    out = a.value.reshape(n_blocks, n).mean(axis=0)
    return Node(out, ((a, lambda g: np.tile(g, n_blocks) / n_blocks),))


def bind_parameters(net: DenseNet) -> tuple[list[Node], list[Node]]:
    """Create parameter leaves for one graph evaluation of `net`."""
    n = net.n_layers
    weights = [Node(w, param=(net, k)) for k, w in enumerate(net.weights)]
    biases = [Node(b, param=(net, n + k)) for k, b in enumerate(net.biases)]
    return weights, biases


def net_forward_graph(net: DenseNet, inputs: np.ndarray) -> Node:
    """Batched forward pass recorded for reverse mode; inputs are constants."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[1] != net.input_width:
        raise ValueError(f"Expected inputs of width {net.input_width}, got shape {inputs.shape}")
    weights, biases = bind_parameters(net)
    h: Node = constant(inputs)
    last = net.n_layers - 1
    for k in range(net.n_layers):
        h = linear(h, weights[k], biases[k])
        if k < last:
            h = activation(h, net.activation)
    return h


def net_jvp_graph(
    net: DenseNet, inputs: np.ndarray, tangents: list[np.ndarray]
) -> tuple[Node, list[Node]]:
    """
    Forward pass plus forward-mode directional derivatives, all recorded for reverse mode.

    Args:
        net: Network.
        inputs: (n, widths[0]) evaluation points.
        tangents: Input-space directions, each (n, widths[0]).
    Returns:
        Output node and one output-tangent node per direction.
    """
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[1] != net.input_width:
        raise ValueError(f"Expected inputs of width {net.input_width}, got shape {inputs.shape}")
    weights, biases = bind_parameters(net)
    h: Node = constant(inputs)
    dirs: list[Node] = [constant(t) for t in tangents]
    last = net.n_layers - 1
    for k in range(net.n_layers):
        z = linear(h, weights[k], biases[k])
        dirs = [linear(d, weights[k]) for d in dirs]
        if k < last:
            slope = activation_prime(z, net.activation)
            dirs = [mul(slope, d) for d in dirs]
            h = activation(z, net.activation)
        else:
            h = z
    return h, dirs


def _topological_order(root: Node) -> list[Node]:
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def loss_backward(net: DenseNet, loss: Node) -> GradientTape:
    """
    Back-propagate a scalar loss to every parameter of `net`.

    Args:
        net: Net whose parameter leaves appear in the loss graph.
        loss: Scalar node.
    Returns:
        GradientTape with dloss/dtheta (zero for parameters the loss never touched).
    Raises:
        ValueError: Loss is not scalar.
        NonFiniteError: Loss value is not finite.
    """
    if loss.value.size != 1:
        raise ValueError(f"Loss must be scalar, got shape {loss.shape}")
    loss_value = float(loss.value)
    if not np.isfinite(loss_value):
        raise NonFiniteError(f"Loss is not finite ({loss_value}); gradients not computed.")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
    params = [np.zeros_like(p) for p in net.parameters()]
    for node in reversed(_topological_order(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.param is not None and node.param[0] is net:
            params[node.param[1]] += g
        for parent, vjp in node.parents:
            contribution = vjp(g)
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + contribution
            else:
                grads[key] = contribution
    n = net.n_layers
    return GradientTape(weights=tuple(params[:n]), biases=tuple(params[n:]), loss=loss_value)
