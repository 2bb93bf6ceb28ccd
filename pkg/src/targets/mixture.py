"""
src/targets/mixture.py
Isotropic Gaussian mixtures with a shared variance: closed under heat flow, rotation
symmetrization and heat-kernel mollification, with exact densities and scores.
Exports: GaussianMixture, four_corner_mixture, mixture_sample, mixture_logdensity, mixture_density,
         mixture_score, mixture_score_divergence, diffuse, symmetrize_mixture, mollify_empirical,
         symmetrized_score, fisher_information
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

from src.common.seeding import make_rng
from src.group.rep import GroupRep
from src.targets.empirical import EmpiricalMeasure, uniform_measure

WEIGHT_SUM_TOL = 1e-12
DEFAULT_CORNER_OFFSET = 5.0
DEFAULT_COMPONENT_VARIANCE = 1.0


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """sum_k w_k N(mean_k, variance * I)."""

    weights: np.ndarray
    means: np.ndarray
    variance: float

    def __post_init__(self) -> None:
        weights = np.asarray(self.weights, dtype=float)
        means = np.asarray(self.means, dtype=float)
        if means.ndim != 2 or means.shape[0] < 1:
            raise ValueError(f"Means must be a (K, d) array with K >= 1, got shape {means.shape}")
        if weights.shape != (means.shape[0],):
            raise ValueError("Mixture weights must have one entry per component.")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"Mixture weights must be non-negative and sum to 1 (sum={weights.sum()!r}).")
        if not np.all(np.isfinite(means)):
            raise ValueError("Mixture means must be finite.")
        if not self.variance > 0:
            raise ValueError(f"Mixture variance must be > 0, got {self.variance}")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variance", float(self.variance))

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def four_corner_mixture(
    variance: float = DEFAULT_COMPONENT_VARIANCE, offset: float = DEFAULT_CORNER_OFFSET
) -> GaussianMixture:
    """Equal-weight mixture centred at (+-offset, +-offset), ordered by 90-degree rotation."""
    means = offset * np.array([[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])
    return GaussianMixture(weights=np.full(4, 0.25), means=means, variance=variance)


def _as_batch(m: GaussianMixture, x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.ndim != 2 or batch.shape[1] != m.dim:
        raise ValueError(f"Expected points of dimension {m.dim}, got shape {x.shape}")
    return batch, single


def _component_logits(m: GaussianMixture, x: np.ndarray) -> np.ndarray:
    """log w_k + log N(x; mu_k, variance I), shape (n, K)."""
    sq = np.sum((x[:, None, :] - m.means[None, :, :]) ** 2, axis=2)
    log_norm = -0.5 * m.dim * np.log(2.0 * np.pi * m.variance)
    with np.errstate(divide="ignore"):
        log_w = np.log(m.weights)
    return log_w[None, :] + log_norm - sq / (2.0 * m.variance)


def mixture_sample(m: GaussianMixture, n: int, seed: int | np.random.Generator) -> EmpiricalMeasure:
    """
    Draw n i.i.d. points: a component by weight, then an isotropic Gaussian.

    Raises:
        ValueError: n < 1.
    """
    if n < 1:
        raise ValueError(f"Sample size must be >= 1, got {n}")
    rng = make_rng(seed)
    components = rng.choice(m.n_components, size=n, p=m.weights)
    noise = rng.standard_normal((n, m.dim))
    return uniform_measure(m.means[components] + np.sqrt(m.variance) * noise)


def mixture_logdensity(m: GaussianMixture, x: np.ndarray) -> np.ndarray | float:
    """Log-density by log-sum-exp; a float for a single point, else shape (n,)."""
    batch, single = _as_batch(m, x)
    values = logsumexp(_component_logits(m, batch), axis=1)
    return float(values[0]) if single else values


def mixture_density(m: GaussianMixture, x: np.ndarray) -> np.ndarray | float:
    batch, single = _as_batch(m, x)
    values = np.exp(logsumexp(_component_logits(m, batch), axis=1))
    return float(values[0]) if single else values


def mixture_score(m: GaussianMixture, x: np.ndarray) -> np.ndarray:
    """sum_k r_k(x) (mu_k - x) / variance with posterior responsibilities r_k."""
    batch, single = _as_batch(m, x)
    resp = softmax(_component_logits(m, batch), axis=1)
    score = (resp @ m.means - batch) / m.variance
    return score[0] if single else score


def mixture_score_divergence(m: GaussianMixture, x: np.ndarray) -> np.ndarray | float:
    """Laplacian of the log-density: -d/var + sum_k r_k |u_k|^2 - |score|^2, u_k = (mu_k - x)/var."""
    batch, single = _as_batch(m, x)
    resp = softmax(_component_logits(m, batch), axis=1)
    u = (m.means[None, :, :] - batch[:, None, :]) / m.variance
    score = np.einsum("nk,nkd->nd", resp, u)
    second = np.einsum("nk,nk->n", resp, np.sum(u * u, axis=2))
    values = -m.dim / m.variance + second - np.sum(score * score, axis=1)
    return float(values[0]) if single else values


def diffuse(m: GaussianMixture, t: float) -> GaussianMixture:
    """
    Law at time t of dX = sqrt(2) dW started from m: the variance grows by 2t.

    Raises:
        ValueError: t < 0.
    """
    if t < 0:
        raise ValueError(f"Diffusion time must be >= 0, got {t}")
    if t == 0:
        return m
    return GaussianMixture(weights=m.weights, means=m.means, variance=m.variance + 2.0 * t)


def _check_dim(m: GaussianMixture, rep: GroupRep) -> None:
    if rep.dim != m.dim:
        raise ValueError(f"Group acts on R^{rep.dim} but the mixture lives in R^{m.dim}.")


def symmetrize_mixture(m: GaussianMixture, rep: GroupRep) -> GaussianMixture:
    """Push-forward average over G: means A_g mu_k with weights w_k/|G| (element-major order)."""
    _check_dim(m, rep)
    if rep.order == 1:
        return m
    means = np.concatenate([m.means @ a.T for a in rep.elements], axis=0)
    weights = np.concatenate([m.weights / rep.order for _ in rep.elements])
    return GaussianMixture(weights=weights, means=means, variance=m.variance)


def mollify_empirical(data: EmpiricalMeasure, eps: float) -> GaussianMixture:
    """
    Convolve an empirical measure with the heat kernel at time eps (variance 2 eps).

    Raises:
        ValueError: eps <= 0.
    """
    if not eps > 0:
        raise ValueError(f"Mollification time must be > 0, got {eps}")
    return GaussianMixture(weights=data.weights, means=data.points, variance=2.0 * eps)


def symmetrized_score(m: GaussianMixture, rep: GroupRep, x: np.ndarray) -> np.ndarray:
    """
    Score of the G-symmetrized mixture from the un-symmetrized one:
    [sum_g A_g^T grad rho(A_g x)] / [sum_g rho(A_g x)], evaluated in the log domain.
    """
    _check_dim(m, rep)
    batch, single = _as_batch(m, x)
    log_dens = []
    scores = []
    for a in rep.elements:
        moved = batch @ a.T
        log_dens.append(mixture_logdensity(m, moved))
        scores.append(mixture_score(m, moved) @ a)
    weights = softmax(np.stack(log_dens, axis=1), axis=1)
    result = np.einsum("ng,gnd->nd", weights, np.stack(scores))
    return result[0] if single else result


def fisher_information(
    m: GaussianMixture, n_mc: int, seed: int | np.random.Generator
) -> tuple[float, float]:
    """Monte Carlo E_m |grad log rho|^2 with its standard error."""
    sample = mixture_sample(m, n_mc, seed)
    sq = np.sum(mixture_score(m, sample.points) ** 2, axis=1)
    return float(sq.mean()), float(sq.std(ddof=1) / np.sqrt(n_mc))
