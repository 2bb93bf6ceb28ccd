"""
src/ndiff/net.py
Dense feed-forward networks over float64 numpy arrays.
Exports: DenseNet, net_init, net_forward, forward_batch, activate, activation_slope, activation_curvature
"""

from dataclasses import dataclass, field, replace

import numpy as np

from src.common.seeding import make_rng

ACTIVATION_SILU = "silu"
ACTIVATION_RELU = "relu"
ACTIVATION_IDENTITY = "identity"
ACTIVATIONS = {ACTIVATION_SILU, ACTIVATION_RELU, ACTIVATION_IDENTITY}


@dataclass(frozen=True, eq=False)
class DenseNet:
    """Fully connected net; weight k has shape widths[k+1] x widths[k]."""

    widths: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    activation: str = ACTIVATION_SILU
    spectral_norm_enabled: bool = False
    power_iter_state: tuple[np.ndarray, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if len(self.widths) < 2 or any(w <= 0 for w in self.widths):
            raise ValueError(f"widths must have >= 2 positive entries, got {list(self.widths)}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"Unknown activation: {self.activation}")
        if len(self.weights) != len(self.widths) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("Parameter count does not match widths.")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.widths[k + 1], self.widths[k]) or b.shape != (self.widths[k + 1],):
                raise ValueError(f"Layer {k} parameter shapes disagree with widths.")
        if self.spectral_norm_enabled and len(self.power_iter_state) != len(self.weights):
            raise ValueError("Spectral normalization needs one power-iteration vector per layer.")

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def input_width(self) -> int:
        return self.widths[0]

    @property
    def output_width(self) -> int:
        return self.widths[-1]

    def parameters(self) -> list[np.ndarray]:
        """Return weights then biases, layer by layer."""
        return [*self.weights, *self.biases]

    def with_parameters(self, params: list[np.ndarray]) -> "DenseNet":
        """Return a copy with parameters replaced (same ordering as `parameters()`)."""
        n = self.n_layers
        return replace(self, weights=tuple(params[:n]), biases=tuple(params[n:]))


def net_init(
    widths: list[int],
    activation: str = ACTIVATION_SILU,
    seed: int = 0,
    *,
    spectral_norm: bool = False,
) -> DenseNet:
    """
    Build a net with U(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and zero biases.

    Args:
        widths: Layer widths, input first.
        activation: Hidden-layer nonlinearity tag (the output layer is linear).
        seed: 64-bit seed; identical (widths, seed) give bit-identical parameters.
        spectral_norm: Attach per-layer power-iteration state.
    Returns:
        Initialized DenseNet.
    Raises:
        ValueError: Empty or non-positive widths.
    """
    widths = [int(w) for w in widths]
    if len(widths) < 2 or any(w <= 0 for w in widths):
        raise ValueError(f"widths must have >= 2 positive entries, got {widths}")
    rng = make_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    state: tuple[np.ndarray, ...] = ()
    if spectral_norm:
        vectors = []
        for fan_out in widths[1:]:
            u = rng.standard_normal(fan_out)
            vectors.append(u / np.linalg.norm(u))
        state = tuple(vectors)
    return DenseNet(
        widths=tuple(widths),
        weights=tuple(weights),
        biases=tuple(biases),
        activation=activation,
        spectral_norm_enabled=spectral_norm,
        power_iter_state=state,
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # Split by sign so exp never overflows.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == ACTIVATION_SILU:
        return z * _sigmoid(z)
    if kind == ACTIVATION_RELU:
        return np.maximum(z, 0.0)
    return z


def activation_slope(z: np.ndarray, kind: str) -> np.ndarray:
    """First derivative of the activation."""
    if kind == ACTIVATION_SILU:
        s = _sigmoid(z)
        return s * (1.0 + z * (1.0 - s))
    if kind == ACTIVATION_RELU:
        return (z > 0).astype(z.dtype)
    return np.ones_like(z)


def activation_curvature(z: np.ndarray, kind: str) -> np.ndarray:
    """Second derivative of the activation (zero for piecewise-linear kinds)."""
    if kind == ACTIVATION_SILU:
        s = _sigmoid(z)
        return s * (1.0 - s) * (2.0 + z * (1.0 - 2.0 * s))
    return np.zeros_like(z)


def forward_batch(net: DenseNet, inputs: np.ndarray) -> np.ndarray:
    """
    Evaluate the net on a batch of row vectors.

    Args:
        net: Network to evaluate.
        inputs: Array of shape (n, widths[0]).
    Returns:
        Array of shape (n, widths[-1]).
    Raises:
        ValueError: Input width mismatch.
    """
    h = np.asarray(inputs, dtype=float)
    if h.ndim != 2 or h.shape[1] != net.input_width:
        raise ValueError(f"Expected inputs of width {net.input_width}, got shape {h.shape}")
    last = net.n_layers - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w.T + b
        if k < last:
            h = activate(h, net.activation)
    return h


def net_forward(net: DenseNet, x: np.ndarray) -> np.ndarray:
    """Evaluate the net on a single input vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != net.input_width:
        raise ValueError(f"Expected input of length {net.input_width}, got shape {x.shape}")
    return forward_batch(net, x[None, :])[0]
