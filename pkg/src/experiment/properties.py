"""
src/experiment/properties.py
Named property suites: exact identities and statistical checks run against fixed seeds,
reported as residual-vs-threshold entries rather than raised.
Exports: PropertyResult, PropertyReport, SUITES, run_property_suite
"""

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import pandas as pd

from src.common.seeding import make_rng, mix_seed
from src.diffusion.losses import dsm_ism_offset_check, esm_loss, ism_loss
from src.diffusion.model import NetField, TimeFeaturizer, build_score_model
from src.diffusion.schedule import DiffusionSchedule
from src.fields import SpaceTimeSample
from src.group.rep import check_group, make_cyclic_rotation_group, make_dihedral_group, make_trivial_group
from src.group.symmetrize import EquivariantWrapper, augment, augment_space_time, dfe, symmetrize_function
from src.metrics.checks import SWEEP_AUGMENTED, SWEEP_PLAIN, contraction_check, sample_complexity_sweep
from src.ndiff.divergence import divergence_batch
from src.ndiff.graph import loss_backward
from src.ndiff.net import DenseNet, forward_batch, net_init
from src.targets.empirical import EmpiricalMeasure
from src.targets.mixture import (
    GaussianMixture,
    diffuse,
    fisher_information,
    four_corner_mixture,
    mixture_density,
    mixture_logdensity,
    mixture_sample,
    mixture_score,
    mollify_empirical,
    symmetrize_mixture,
    symmetrized_score,
)

logger = logging.getLogger(__name__)

ISM_TRANSFER_TOL = 1e-10
ESM_DECOMPOSITION_TOL = 1e-9
MINIMIZER_TOL = 1e-9
SCORE_LEMMA_TOL = 1e-6
COMMUTATION_TOL = 1e-12
GRADIENT_REL_TOL = 1e-4
GRADIENT_STEP = 1e-5
GRADIENT_SCALE_FLOOR = 1e-4
DIVERGENCE_TOL = 1e-6
EQUIVARIANCE_TOL = 1e-9
OFFSET_SEEDS = 10
OFFSET_SAMPLES = 100_000
OFFSET_TIME = 0.1
CONTRACTION_TRIALS = 100
SWEEP_NS = [32, 64, 128, 256, 512, 1024]
SWEEP_REPS = 20
SWEEP_SLOPE_RANGE = (-0.65, -0.35)
N_RANDOM_NETS = 20


@dataclass(frozen=True)
class PropertyResult:
    suite: str
    name: str
    passed: bool
    residual: float
    threshold: float
    detail: str = ""


@dataclass(frozen=True)
class PropertyReport:
    results: tuple[PropertyResult, ...]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "suite": r.suite,
                    "name": r.name,
                    "passed": r.passed,
                    "residual": r.residual,
                    "threshold": r.threshold,
                    "detail": r.detail,
                }
                for r in self.results
            ],
            columns=["suite", "name", "passed", "residual", "threshold", "detail"],
        )


def _result(suite: str, name: str, residual: float, threshold: float, detail: str = "") -> PropertyResult:
    return PropertyResult(suite, name, bool(residual <= threshold), float(residual), float(threshold), detail)


def _eval_set(seed: int, n_points: int = 64, n_times: int = 8) -> SpaceTimeSample:
    """Fixed evaluation set: n_points spread over n_times geometric times."""
    rng = make_rng(seed)
    times = np.repeat(np.geomspace(0.01, 10.0, n_times), n_points // n_times)
    points = 3.0 * rng.standard_normal((times.shape[0], 2))
    return SpaceTimeSample.uniform(points, times)


def _lopsided_mixture(seed: int) -> GaussianMixture:
    rng = make_rng(seed)
    return GaussianMixture(
        weights=np.array([0.5, 0.3, 0.2]), means=rng.uniform(-4.0, 4.0, size=(3, 2)), variance=1.0
    )


def _group_identities() -> list[PropertyResult]:
    results = []
    for rep in (make_cyclic_rotation_group(4), make_dihedral_group(4), make_trivial_group(2)):
        report = check_group(rep)
        worst = max(check.residual - check.tolerance for check in report.checks)
        results.append(
            PropertyResult(
                "group-identities", f"axioms/{rep.name}", report.passed, max(worst, 0.0), 0.0, ",".join(report.failures())
            )
        )
    rep = make_cyclic_rotation_group(4)
    model = build_score_model(2, DiffusionSchedule(), equivariant=True, group=rep, seed=7)
    sample = _eval_set(7)
    base = model.evaluate(sample.points, sample.times)
    residual = 0.0
    for a in rep.elements:
        moved = model.evaluate(sample.points @ a.T, sample.times)
        residual = max(residual, float(np.max(np.abs(moved - base @ a.T))))
    results.append(_result("group-identities", "wrapped-net-equivariance", residual, EQUIVARIANCE_TOL))
    data = mixture_sample(_lopsided_mixture(3), 16, 3)
    twice = augment(augment(data, rep), rep)
    once = augment(data, rep)
    projection = abs(
        mixture_density(mollify_empirical(twice, 0.5), np.zeros(2)) - mixture_density(mollify_empirical(once, 0.5), np.zeros(2))
    )
    results.append(_result("group-identities", "augment-projection", projection, COMMUTATION_TOL))
    return results


def _ism_transfer() -> list[PropertyResult]:
    rep = make_cyclic_rotation_group(4)
    worst = 0.0
    for i in range(N_RANDOM_NETS):
        model = build_score_model(2, DiffusionSchedule(), equivariant=True, group=rep, seed=mix_seed(11, i))
        sample = _eval_set(mix_seed(12, i))
        plain = ism_loss(model, sample).item()
        moved = ism_loss(model, augment_space_time(sample, rep)).item()
        worst = max(worst, abs(plain - moved) / abs(plain))
    return [_result("ism-transfer", "equivariant-nets", worst, ISM_TRANSFER_TOL)]


def _esm_decomposition() -> list[PropertyResult]:
    rep = make_cyclic_rotation_group(4)
    target = four_corner_mixture()

    def target_at(t: float) -> GaussianMixture:
        return diffuse(target, t)

    worst = 0.0
    for i in range(N_RANDOM_NETS):
        model = build_score_model(2, DiffusionSchedule(), seed=mix_seed(21, i))
        sample = augment_space_time(_eval_set(mix_seed(22, i)), rep)
        full = esm_loss(model, target_at, sample).item()
        gap = dfe(model, rep, sample)
        projected = esm_loss(EquivariantWrapper(model, rep), target_at, sample).item()
        worst = max(worst, abs(full - gap - projected) / max(1.0, full))
    return [_result("esm-decomposition", "plain-nets", worst, ESM_DECOMPOSITION_TOL)]


def _score_lemma() -> list[PropertyResult]:
    rep = make_cyclic_rotation_group(4)
    m = _lopsided_mixture(31)
    rng = make_rng(32)
    points = 3.0 * rng.standard_normal((100, 2))
    lemma = symmetrized_score(m, rep, points)
    explicit = mixture_score(symmetrize_mixture(m, rep), points)
    h = 1e-5
    symmetric = symmetrize_mixture(m, rep)
    finite = np.zeros_like(points)
    for i in range(2):
        step = np.zeros(2)
        step[i] = h
        finite[:, i] = (mixture_logdensity(symmetric, points + step) - mixture_logdensity(symmetric, points - step)) / (
            2.0 * h
        )
    residual = max(float(np.max(np.abs(lemma - explicit))), float(np.max(np.abs(lemma - finite))))
    results = [_result("score-lemma", "three-way", residual, SCORE_LEMMA_TOL)]

    # Density-weighted quadrature on full orbits: the lemma field minimizes ESM among equivariant fields.
    quadrature = augment_space_time(SpaceTimeSample.uniform(points[:64], np.full(64, 0.5)), rep)
    weights = mixture_density(m, quadrature.points)
    sample = SpaceTimeSample(points=quadrature.points, times=quadrature.times, weights=weights)
    exact = mixture_score(m, sample.points)
    best = np.sum((symmetrized_score(m, rep, sample.points) - exact) ** 2, axis=1) @ weights / weights.sum()
    shortfall = 0.0
    for i in range(N_RANDOM_NETS):
        candidate = build_score_model(2, DiffusionSchedule(), equivariant=True, group=rep, seed=mix_seed(33, i))
        value = np.sum((candidate.evaluate(sample.points, sample.times) - exact) ** 2, axis=1) @ weights / weights.sum()
        shortfall = max(shortfall, float(best - value))
    results.append(_result("score-lemma", "equivariant-minimizer", shortfall, MINIMIZER_TOL))
    return results


def _commutation() -> list[PropertyResult]:
    rep = make_cyclic_rotation_group(4)
    worst = 0.0
    for i in range(10):
        rng = make_rng(mix_seed(41, i))
        n = int(rng.integers(5, 21))
        weights = rng.dirichlet(np.ones(n))
        weights = weights / weights.sum()
        eta = EmpiricalMeasure(points=3.0 * rng.standard_normal((n, 2)), weights=weights)
        near = eta.points[rng.integers(0, n, size=50)] @ rep.elements[int(rng.integers(0, rep.order))].T
        query_points = np.concatenate([near + 0.05 * rng.standard_normal((50, 2)), 4.0 * rng.standard_normal((50, 2))])
        for eps in (1e-3, 0.1, 1.0):
            diffused_first = symmetrize_mixture(mollify_empirical(eta, eps), rep)
            symmetrized_first = mollify_empirical(augment(eta, rep), eps)
            a = mixture_density(symmetrized_first, query_points)
            b = mixture_density(diffused_first, query_points)
            kernel = mollify_empirical(eta, eps)
            c = np.array([symmetrize_function(rep, lambda y: mixture_density(kernel, y), x) for x in query_points])
            scale = max(1.0, float(np.max(np.abs(a))))
            worst = max(worst, float(np.max(np.abs(a - b))) / scale, float(np.max(np.abs(a - c))) / scale)
    return [_result("commutation", "heat-flow-vs-averaging", worst, COMMUTATION_TOL)]


def _contraction() -> list[PropertyResult]:
    rep = make_cyclic_rotation_group(4)
    target = four_corner_mixture()
    failures = 0
    for i in range(CONTRACTION_TRIALS):
        rng = make_rng(mix_seed(51, i))
        eta = mixture_sample(target, int(rng.integers(8, 65)), rng)
        reference = mixture_sample(target, 128, rng)
        if not contraction_check(eta, reference, rep).passed:
            failures += 1
    return [_result("contraction", f"{CONTRACTION_TRIALS}-trials", failures, 0.0)]


def _offset_check() -> list[PropertyResult]:
    target = four_corner_mixture()
    failures = []
    worst = 0.0
    for seed in range(OFFSET_SEEDS):
        report = dsm_ism_offset_check(target, OFFSET_TIME, OFFSET_SAMPLES, seed)
        worst = max(worst, abs(report.discrepancy) / max(report.standard_error, 1e-300))
        if not report.passed:
            failures.append(str(seed))
    results = [_result("offset-check", "random-nets", worst, 4.0, ",".join(failures))]
    gaussian = GaussianMixture(weights=np.array([1.0]), means=np.zeros((1, 2)), variance=1.0)
    fisher, se = fisher_information(gaussian, OFFSET_SAMPLES, 0)
    results.append(_result("offset-check", "gaussian-fisher", abs(fisher - 2.0) / se, 4.0))
    return results


def _numeric_gradient(loss: Callable[[DenseNet], float], net: DenseNet) -> list[np.ndarray]:
    """Central differences with a per-parameter step h = GRADIENT_STEP * (1 + |theta_i|)."""
    params = net.parameters()
    grads = []
    for k, p in enumerate(params):
        g = np.zeros_like(p)
        for index in np.ndindex(p.shape):
            h = GRADIENT_STEP * (1.0 + abs(float(p[index])))
            shifted = [q.copy() for q in params]
            shifted[k][index] = p[index] + h
            up = loss(net.with_parameters(shifted))
            shifted[k][index] = p[index] - h
            down = loss(net.with_parameters(shifted))
            g[index] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


def _max_relative_error(analytic: list[np.ndarray], numeric: list[np.ndarray]) -> float:
    """Worst per-parameter |a - n| / max(|a|, |n|, GRADIENT_SCALE_FLOOR)."""
    a = np.concatenate([g.ravel() for g in analytic])
    n = np.concatenate([g.ravel() for g in numeric])
    scale = np.maximum(np.maximum(np.abs(a), np.abs(n)), GRADIENT_SCALE_FLOOR)
    return float(np.max(np.abs(a - n) / scale))


def _gradient_check() -> list[PropertyResult]:
    featurizer = TimeFeaturizer(T=10.0, eps=1e-3)
    worst_grad = 0.0
    worst_div = 0.0
    h = GRADIENT_STEP
    for i in range(10):
        net = net_init([4, 8, 8, 2], "silu", mix_seed(61, i))
        sample = _eval_set(mix_seed(62, i), n_points=16, n_times=4)

        def loss(candidate: DenseNet) -> float:
            return ism_loss(NetField(candidate, featurizer), sample).item()

        tape = loss_backward(net, ism_loss(NetField(net, featurizer), sample))
        worst_grad = max(worst_grad, _max_relative_error(tape.parameters(), _numeric_gradient(loss, net)))

        features = featurizer(sample.times)
        div = divergence_batch(net, sample.points, features)
        trace = np.zeros(sample.size)
        for axis in range(2):
            step = np.zeros(2)
            step[axis] = h
            up = forward_batch(net, np.concatenate([sample.points + step, features], axis=1))[:, axis]
            down = forward_batch(net, np.concatenate([sample.points - step, features], axis=1))[:, axis]
            trace += (up - down) / (2.0 * h)
        worst_div = max(worst_div, float(np.max(np.abs(div - trace))))
    return [
        _result("gradient-check", "reverse-mode-vs-central-differences", worst_grad, GRADIENT_REL_TOL),
        _result("gradient-check", "divergence-vs-jacobian-trace", worst_div, DIVERGENCE_TOL),
    ]


def _sweep() -> list[PropertyResult]:
    result = sample_complexity_sweep(
        four_corner_mixture(), make_cyclic_rotation_group(4), SWEEP_NS, SWEEP_REPS, seed=71
    )
    table = result.table
    plain = table[table["method"] == SWEEP_PLAIN].set_index("N")
    augmented = table[table["method"] == SWEEP_AUGMENTED].set_index("N")
    excess = float(np.max(augmented["mean_d1"] - plain["mean_d1"] - plain["stderr"]))
    slope = result.slopes[SWEEP_PLAIN]
    low, high = SWEEP_SLOPE_RANGE
    slope_miss = max(low - slope, slope - high, 0.0)
    return [
        _result("sweep", "augmented-below-plain", max(excess, 0.0), 0.0),
        _result("sweep", "plain-slope", slope_miss, 0.0, f"slope={slope:.3f}"),
    ]


SUITES: dict[str, Callable[[], list[PropertyResult]]] = {
    "group-identities": _group_identities,
    "ism-transfer": _ism_transfer,
    "esm-decomposition": _esm_decomposition,
    "score-lemma": _score_lemma,
    "commutation": _commutation,
    "contraction": _contraction,
    "offset-check": _offset_check,
    "gradient-check": _gradient_check,
    "sweep": _sweep,
}


def run_property_suite(selector: list[str]) -> PropertyReport:
    """
    Run the named suites ("all" expands to every suite) and collect their results.

    Unknown names and suites that raise become failed entries.
    """
    names: list[str] = []
    for name in selector:
        for expanded in SUITES if name == "all" else [name]:
            if expanded not in names:
                names.append(expanded)
    results: list[PropertyResult] = []
    for name in names:
        suite = SUITES.get(name)
        if suite is None:
            results.append(PropertyResult(name, "unknown-suite", False, 1.0, 0.0, f"no suite named {name!r}"))
            continue
        try:
            entries = suite()
        except Exception as exc:
            logger.exception("Property suite %s raised.", name)
            entries = [PropertyResult(name, "error", False, 1.0, 0.0, str(exc))]
        for entry in entries:
            logger.info(
                "%-18s %-36s %s residual=%.3e threshold=%.1e",
                entry.suite,
                entry.name,
                "PASS" if entry.passed else "FAIL",
                entry.residual,
                entry.threshold,
            )
        results.extend(entries)
    return PropertyReport(results=tuple(results))
