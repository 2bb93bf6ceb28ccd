"""Numerical failure types shared by training, sampling and the net engine."""


class NonFiniteError(RuntimeError):
    """Raised when a loss, gradient or state stops being finite."""


class TrainingDivergedError(NonFiniteError):
    """Training loss went non-finite; `iteration` is the failing step (0-based)."""

    def __init__(self, iteration: int, detail: str = "") -> None:
        self.iteration = iteration
        message = f"Training diverged at iteration {iteration}"
        super().__init__(f"{message}: {detail}" if detail else message)


class SamplerDivergedError(NonFiniteError):
    """Reverse-SDE state went non-finite; `step` is the failing step (0-based)."""

    def __init__(self, step: int) -> None:
        self.step = step
        super().__init__(f"Reverse sampler state became non-finite at step {step}")
