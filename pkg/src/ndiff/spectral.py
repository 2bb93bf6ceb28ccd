"""
src/ndiff/spectral.py
Spectral normalization of each weight matrix by a warm-started power-iteration estimate.
Exports: power_iteration, spectral_normalize, layer_spectral_norms
"""

from dataclasses import replace

import numpy as np

from src.ndiff.net import DenseNet

_NORM_FLOOR = 1e-12


def power_iteration(weight: np.ndarray, u: np.ndarray, n_iters: int) -> tuple[float, np.ndarray]:
    """
    Estimate the leading singular value of `weight`.

    Args:
        weight: (m, n) matrix.
        u: Unit starting vector of length m.
        n_iters: Number of u -> v -> u rounds (>= 1).
    Returns:
        (sigma estimate, updated unit u). Sigma is 0.0 for a zero matrix.
    """
    for _ in range(max(1, n_iters)):
        v = weight.T @ u
        v_norm = np.linalg.norm(v)
        if v_norm < _NORM_FLOOR:
            return 0.0, u
        v = v / v_norm
        u_next = weight @ v
        u_norm = np.linalg.norm(u_next)
        if u_norm < _NORM_FLOOR:
            return 0.0, u
        u = u_next / u_norm
    return float(u @ weight @ v), u


def spectral_normalize(net: DenseNet, n_power_iters: int = 1) -> DenseNet:
    """
    Divide every weight matrix by its estimated leading singular value.

    Args:
        net: Net with spectral_norm_enabled.
        n_power_iters: Power-iteration rounds, warm-started from the stored vectors.
    Returns:
        Net with normalized weights and updated power-iteration state.
    Raises:
        ValueError: Spectral normalization is not enabled on the net.
    """
    if not net.spectral_norm_enabled:
        raise ValueError("spectral_normalize requires a net built with spectral_norm=True.")
    weights = []
    vectors = []
    for w, u in zip(net.weights, net.power_iter_state):
        sigma, u = power_iteration(w, u, n_power_iters)
        vectors.append(u)
        # Zero matrices stay as they are.
        weights.append(w / sigma if sigma > 0.0 else w)
    return replace(net, weights=tuple(weights), power_iter_state=tuple(vectors))


def layer_spectral_norms(net: DenseNet) -> list[float]:
    """Exact leading singular value of every layer (dense SVD)."""
    return [float(np.linalg.svd(w, compute_uv=False)[0]) for w in net.weights]
