"""Deterministic seed derivation: 64-bit mixing hash and numpy Generator factory."""

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF


def splitmix64(value: int) -> int:
    """One round of the splitmix64 finalizer on a 64-bit integer."""
    z = (value + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def mix_seed(*parts: int) -> int:
    """Fold integers into one 64-bit seed; order matters."""
    state = 0
    for part in parts:
        state = splitmix64(state ^ (int(part) & _MASK))
    return state


def make_rng(seed: int | np.random.Generator) -> np.random.Generator:
    """Return a PCG64 generator for a seed (generators pass through)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK))
