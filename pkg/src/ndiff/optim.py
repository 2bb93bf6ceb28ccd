"""
src/ndiff/optim.py
Plain SGD and bias-corrected adaptive-moment updates over DenseNet parameters.
Exports: OptimizerState, init_optimizer, optimizer_step
"""

from dataclasses import dataclass, replace

import numpy as np

from src.common.errors import NonFiniteError
from src.ndiff.graph import GradientTape
from src.ndiff.net import DenseNet

OPTIMIZER_SGD = "sgd"
OPTIMIZER_ADAM = "adam"
DEFAULT_LEARNING_RATE = 1e-3


@dataclass(frozen=True, eq=False)
class OptimizerState:
    """Optimizer hyperparameters plus moment accumulators (adaptive kind only)."""

    kind: str = OPTIMIZER_ADAM
    learning_rate: float = DEFAULT_LEARNING_RATE
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    first_moments: tuple[np.ndarray, ...] = ()
    second_moments: tuple[np.ndarray, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in {OPTIMIZER_SGD, OPTIMIZER_ADAM}:
            raise ValueError(f"Unknown optimizer kind: {self.kind}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")


def init_optimizer(
    net: DenseNet,
    kind: str = OPTIMIZER_ADAM,
    learning_rate: float = DEFAULT_LEARNING_RATE,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> OptimizerState:
    """Return a fresh optimizer state whose accumulators match `net`."""
    moments: tuple[np.ndarray, ...] = ()
    if kind == OPTIMIZER_ADAM:
        moments = tuple(np.zeros_like(p) for p in net.parameters())
    return OptimizerState(
        kind=kind,
        learning_rate=learning_rate,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
        first_moments=moments,
        second_moments=tuple(np.zeros_like(m) for m in moments),
    )


def optimizer_step(
    net: DenseNet, tape: GradientTape, state: OptimizerState
) -> tuple[DenseNet, OptimizerState]:
    """
    Apply one update and return the new net and state.

    Args:
        net: Current parameters.
        tape: Gradients shaped like `net`.
        state: Optimizer state; left untouched on failure.
    Returns:
        (updated net, updated state with step + 1).
    Raises:
        ValueError: Gradient or accumulator shapes disagree with the net.
        NonFiniteError: Non-finite gradients; the step is refused.
    """
    params = net.parameters()
    grads = tape.parameters()
    if len(grads) != len(params) or any(g.shape != p.shape for g, p in zip(grads, params)):
        raise ValueError("Gradient shapes do not match the net's parameters.")
    if not all(np.all(np.isfinite(g)) for g in grads):
        raise NonFiniteError(f"Non-finite gradient at optimizer step {state.step}; step refused.")
    lr = state.learning_rate
    if state.kind == OPTIMIZER_SGD:
        updated = [p - lr * g for p, g in zip(params, grads)]
        return net.with_parameters(updated), replace(state, step=state.step + 1)

    if len(state.first_moments) != len(params):
        raise ValueError("Optimizer accumulators do not match the net's parameters.")
    step = state.step + 1
    correction1 = 1.0 - state.beta1**step
    correction2 = 1.0 - state.beta2**step
    first, second, updated = [], [], []
    for p, g, m, v in zip(params, grads, state.first_moments, state.second_moments):
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        updated.append(p - lr * m_hat / (np.sqrt(v_hat) + state.eps))
        first.append(m)
        second.append(v)
    new_state = replace(state, step=step, first_moments=tuple(first), second_moments=tuple(second))
    return net.with_parameters(updated), new_state
