"""
tests/test_targets.py
Unit tests for src/targets: empirical measures and isotropic Gaussian mixtures.
"""

import numpy as np
import pytest


def _standard_gaussian():
    from src.targets.mixture import GaussianMixture

    return GaussianMixture(weights=np.array([1.0]), means=np.zeros((1, 2)), variance=1.0)


def _random_mixture(seed):
    from src.targets.mixture import GaussianMixture

    rng = np.random.default_rng(seed)
    weights = rng.dirichlet(np.ones(3))
    return GaussianMixture(weights=weights / weights.sum(), means=rng.uniform(-3, 3, size=(3, 2)), variance=0.8)


def test_mixture_validation():
    from src.targets.mixture import GaussianMixture

    with pytest.raises(ValueError):
        GaussianMixture(weights=np.array([0.5, 0.4]), means=np.zeros((2, 2)), variance=1.0)
    with pytest.raises(ValueError):
        GaussianMixture(weights=np.array([1.0]), means=np.zeros((1, 2)), variance=0.0)


def test_sample_mean_of_standard_gaussian():
    from src.targets.mixture import mixture_sample

    sample = mixture_sample(_standard_gaussian(), 100_000, 0)
    assert np.all(np.abs(sample.points.mean(axis=0)) < 4.0 / np.sqrt(100_000))


def test_sample_from_degenerate_weights():
    from src.targets.mixture import GaussianMixture, mixture_sample

    m = GaussianMixture(weights=np.array([1.0, 0.0]), means=np.array([[50.0, 50.0], [-50.0, -50.0]]), variance=1.0)
    assert np.all(mixture_sample(m, 500, 3).points > 0)


def test_sample_is_deterministic():
    from src.targets.mixture import four_corner_mixture, mixture_sample

    a = mixture_sample(four_corner_mixture(), 50, 9)
    b = mixture_sample(four_corner_mixture(), 50, 9)
    assert np.array_equal(a.points, b.points)


def test_logdensity_at_mode():
    from src.targets.mixture import mixture_logdensity

    assert mixture_logdensity(_standard_gaussian(), np.zeros(2)) == pytest.approx(-np.log(2 * np.pi), rel=1e-15)


def test_logdensity_equidistant_point():
    from src.targets.mixture import GaussianMixture, mixture_logdensity

    two = GaussianMixture(weights=np.array([0.5, 0.5]), means=np.array([[-1.0, 0.0], [1.0, 0.0]]), variance=1.0)
    one = GaussianMixture(weights=np.array([1.0]), means=np.array([[1.0, 0.0]]), variance=1.0)
    x = np.array([0.0, 0.7])
    assert mixture_logdensity(two, x) == pytest.approx(mixture_logdensity(one, x), rel=1e-14)


def test_logdensity_matches_direct_summation():
    from src.targets.mixture import four_corner_mixture, mixture_logdensity

    m = four_corner_mixture()
    x = np.array([5.0, 5.0])
    direct = sum(
        w * np.exp(-np.sum((x - mu) ** 2) / 2.0) / (2 * np.pi) for w, mu in zip(m.weights, m.means)
    )
    assert mixture_logdensity(m, x) == pytest.approx(np.log(direct), rel=1e-13)


def test_score_of_single_gaussian():
    from src.targets.mixture import GaussianMixture, mixture_score

    m = GaussianMixture(weights=np.array([1.0]), means=np.array([[1.0, -2.0]]), variance=2.0)
    x = np.array([0.5, 0.5])
    np.testing.assert_allclose(mixture_score(m, x), (m.means[0] - x) / 2.0)


def test_score_vanishes_at_symmetry_point():
    from src.targets.mixture import four_corner_mixture, mixture_score

    np.testing.assert_allclose(mixture_score(four_corner_mixture(), np.zeros(2)), 0.0, atol=1e-15)


def test_score_matches_finite_differences():
    from src.targets.mixture import mixture_logdensity, mixture_score

    m = _random_mixture(1)
    points = np.random.default_rng(2).normal(size=(20, 2)) * 2
    h = 1e-5
    fd = np.stack(
        [
            (mixture_logdensity(m, points + h * e) - mixture_logdensity(m, points - h * e)) / (2 * h)
            for e in np.eye(2)
        ],
        axis=1,
    )
    np.testing.assert_allclose(mixture_score(m, points), fd, atol=1e-6)


def test_score_divergence_matches_finite_differences():
    from src.targets.mixture import mixture_score, mixture_score_divergence

    m = _random_mixture(3)
    points = np.random.default_rng(4).normal(size=(20, 2))
    h = 1e-5
    fd = sum(
        (mixture_score(m, points + h * e)[:, i] - mixture_score(m, points - h * e)[:, i]) / (2 * h)
        for i, e in enumerate(np.eye(2))
    )
    np.testing.assert_allclose(mixture_score_divergence(m, points), fd, atol=1e-6)


def test_diffuse_time_zero_is_identity():
    from src.targets.mixture import diffuse, four_corner_mixture

    m = four_corner_mixture()
    assert diffuse(m, 0.0) is m


def test_diffuse_adds_variance():
    from src.targets.mixture import diffuse

    assert diffuse(_standard_gaussian(), 0.5).variance == 2.0


def test_diffuse_semigroup():
    from src.targets.mixture import diffuse, four_corner_mixture

    m = four_corner_mixture()
    assert diffuse(diffuse(m, 0.3), 0.7).variance == pytest.approx(diffuse(m, 1.0).variance, rel=1e-15)
    assert np.array_equal(diffuse(diffuse(m, 0.3), 0.7).means, diffuse(m, 1.0).means)


def test_diffuse_rejects_negative_time():
    from src.targets.mixture import diffuse

    with pytest.raises(ValueError):
        diffuse(_standard_gaussian(), -0.1)


def test_diffused_invariant_mixture_has_equivariant_score():
    from src.group.rep import make_cyclic_rotation_group
    from src.targets.mixture import diffuse, four_corner_mixture, mixture_score

    rep = make_cyclic_rotation_group(4)
    points = 4.0 * np.random.default_rng(8).normal(size=(50, 2))
    for t in (0.01, 1.0, 10.0):
        m = diffuse(four_corner_mixture(), t)
        base = mixture_score(m, points)
        for a in rep.elements:
            np.testing.assert_allclose(mixture_score(m, points @ a.T), base @ a.T, rtol=1e-9, atol=1e-9)


def test_symmetrize_invariant_mixture_keeps_density():
    from src.group.rep import make_cyclic_rotation_group
    from src.targets.mixture import four_corner_mixture, mixture_density, symmetrize_mixture

    m = four_corner_mixture()
    sym = symmetrize_mixture(m, make_cyclic_rotation_group(4))
    assert sym.n_components == 16
    points = np.random.default_rng(5).normal(size=(100, 2)) * 4
    np.testing.assert_allclose(mixture_density(sym, points), mixture_density(m, points), rtol=1e-12, atol=1e-12)


def test_symmetrize_single_corner_gives_four_corners():
    from src.group.rep import make_cyclic_rotation_group
    from src.targets.mixture import GaussianMixture, four_corner_mixture, symmetrize_mixture

    corner = GaussianMixture(weights=np.array([1.0]), means=np.array([[5.0, 5.0]]), variance=1.0)
    sym = symmetrize_mixture(corner, make_cyclic_rotation_group(4))
    np.testing.assert_array_equal(sym.means, four_corner_mixture().means)
    np.testing.assert_array_equal(sym.weights, np.full(4, 0.25))


def test_symmetrize_trivial_group():
    from src.group.rep import make_trivial_group
    from src.targets.mixture import four_corner_mixture, symmetrize_mixture

    m = four_corner_mixture()
    assert symmetrize_mixture(m, make_trivial_group()) is m


def test_mollify_single_point():
    from src.targets.empirical import uniform_measure
    from src.targets.mixture import mollify_empirical

    m = mollify_empirical(uniform_measure(np.zeros((1, 2))), 0.5)
    assert m.variance == 1.0
    assert np.array_equal(m.means, np.zeros((1, 2)))


def test_mollify_small_time_peak():
    from src.targets.empirical import uniform_measure
    from src.targets.mixture import mixture_density, mollify_empirical

    data = uniform_measure(np.array([[0.0, 0.0], [10.0, 10.0]]))
    eps = 1e-6
    peak = mixture_density(mollify_empirical(data, eps), np.zeros(2))
    assert peak == pytest.approx(1.0 / (4 * np.pi * eps) / 2, rel=1e-12)


def test_mollified_density_integrates_to_one():
    from src.targets.empirical import uniform_measure
    from src.targets.mixture import mixture_density, mollify_empirical

    nodes, weights = np.polynomial.hermite.hermgauss(40)
    y = np.stack(np.meshgrid(nodes, nodes, indexing="ij"), axis=-1).reshape(-1, 2)
    w = np.outer(weights, weights).ravel()
    for seed, eps in [(0, 0.5), (1, 0.2), (2, 1.0)]:
        data = uniform_measure(np.random.default_rng(seed).uniform(-0.5, 0.5, size=(3, 2)))
        sigma = np.sqrt(2.0 * eps)
        x = np.sqrt(2.0) * sigma * y
        # Gauss-Hermite weights carry exp(-|y|^2); undo it on the integrand.
        integrand = mixture_density(mollify_empirical(data, eps), x) * np.exp(np.sum(y**2, axis=1))
        assert 2.0 * sigma**2 * float(w @ integrand) == pytest.approx(1.0, abs=1e-6)


def test_mollify_rejects_non_positive_time():
    from src.targets.empirical import uniform_measure
    from src.targets.mixture import mollify_empirical

    with pytest.raises(ValueError):
        mollify_empirical(uniform_measure(np.zeros((1, 2))), 0.0)


def test_symmetrized_score_trivial_group():
    from src.group.rep import make_trivial_group
    from src.targets.mixture import mixture_score, symmetrized_score

    m = _random_mixture(6)
    points = np.random.default_rng(7).normal(size=(10, 2))
    np.testing.assert_allclose(symmetrized_score(m, make_trivial_group(), points), mixture_score(m, points), rtol=1e-14)


def test_symmetrized_score_at_fixed_point():
    from src.group.rep import make_cyclic_rotation_group
    from src.targets.mixture import GaussianMixture, symmetrized_score

    corner = GaussianMixture(weights=np.array([1.0]), means=np.array([[5.0, 5.0]]), variance=1.0)
    np.testing.assert_allclose(symmetrized_score(corner, make_cyclic_rotation_group(4), np.zeros(2)), 0.0, atol=1e-14)


def test_symmetrized_score_three_way_agreement():
    from src.group.rep import make_cyclic_rotation_group
    from src.targets.mixture import mixture_logdensity, mixture_score, symmetrize_mixture, symmetrized_score

    rep = make_cyclic_rotation_group(4)
    m = _random_mixture(8)
    sym = symmetrize_mixture(m, rep)
    points = np.random.default_rng(9).normal(size=(50, 2)) * 3
    lemma = symmetrized_score(m, rep, points)
    h = 1e-5
    fd = np.stack(
        [(mixture_logdensity(sym, points + h * e) - mixture_logdensity(sym, points - h * e)) / (2 * h) for e in np.eye(2)],
        axis=1,
    )
    np.testing.assert_allclose(lemma, mixture_score(sym, points), atol=1e-10)
    np.testing.assert_allclose(lemma, fd, atol=1e-6)


def test_fisher_information_of_standard_gaussian():
    from src.targets.mixture import fisher_information

    value, se = fisher_information(_standard_gaussian(), 100_000, 0)
    assert abs(value - 2.0) <= 4.0 * se


def test_empirical_measure_validation():
    from src.targets.empirical import EmpiricalMeasure

    with pytest.raises(ValueError):
        EmpiricalMeasure(points=np.zeros((2, 2)), weights=np.array([0.7, 0.7]))
    with pytest.raises(ValueError):
        EmpiricalMeasure(points=np.zeros((0, 2)), weights=np.zeros(0))


def test_measure_csv_round_trip(tmp_path):
    from src.targets.empirical import EmpiricalMeasure, load_measure, save_measure

    measure = EmpiricalMeasure(points=np.array([[0.1, -2.0], [3.0, 1.0 / 3.0]]), weights=np.array([0.25, 0.75]))
    loaded = load_measure(save_measure(measure, tmp_path / "m.csv"))
    np.testing.assert_array_equal(loaded.points, measure.points)
    np.testing.assert_array_equal(loaded.weights, measure.weights)


def test_subsample_draws_uniform_measure():
    from src.targets.empirical import EmpiricalMeasure

    measure = EmpiricalMeasure(points=np.array([[0.0, 0.0], [1.0, 1.0]]), weights=np.array([0.0, 1.0]))
    sub = measure.subsample(20, 1)
    assert sub.size == 20
    assert np.all(sub.points == 1.0)
