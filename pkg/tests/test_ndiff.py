"""
tests/test_ndiff.py
Unit tests for src/ndiff: nets, reverse mode, divergence, optimizer, spectral norm, checkpoints.
"""

import numpy as np
import pytest

from src.common.errors import NonFiniteError
from src.ndiff.graph import GradientTape


def _straight_line_forward(net, x):
    h = x
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = w @ h + b
        if k < net.n_layers - 1:
            h = h / (1.0 + np.exp(-h))
    return h


def test_net_init_shapes():
    from src.ndiff.net import net_init

    net = net_init([4, 32, 32, 32, 2], seed=0)
    assert [w.shape for w in net.weights] == [(32, 4), (32, 32), (32, 32), (2, 32)]


def test_net_init_critic_biases_are_zero():
    from src.ndiff.net import net_init

    net = net_init([2, 64, 64, 1], seed=7)
    assert all(np.all(b == 0.0) for b in net.biases)


def test_net_init_is_deterministic():
    from src.ndiff.net import net_init

    a = net_init([3, 8, 2], seed=11)
    b = net_init([3, 8, 2], seed=11)
    assert all(np.array_equal(p, q) for p, q in zip(a.parameters(), b.parameters()))


def test_net_init_rejects_bad_widths():
    from src.ndiff.net import net_init

    with pytest.raises(ValueError):
        net_init([3])
    with pytest.raises(ValueError):
        net_init([3, 0, 2])


def test_zero_net_outputs_zero():
    from src.ndiff.net import forward_batch, net_init

    net = net_init([3, 5, 2], seed=1)
    zero = net.with_parameters([np.zeros_like(p) for p in net.parameters()])
    assert np.all(forward_batch(zero, np.random.default_rng(0).normal(size=(4, 3))) == 0.0)


def test_single_linear_layer_is_matrix_product():
    from src.ndiff.net import DenseNet, net_forward

    w = np.array([[1.0, 2.0], [3.0, -1.0]])
    net = DenseNet(widths=(2, 2), weights=(w,), biases=(np.zeros(2),), activation="identity")
    x = np.array([0.5, -2.0])
    np.testing.assert_allclose(net_forward(net, x), w @ x)


def test_forward_matches_straight_line_chain():
    from src.ndiff.net import net_forward, net_init

    net = net_init([3, 6, 6, 2], seed=5)
    x = np.array([0.3, -1.2, 2.0])
    np.testing.assert_allclose(net_forward(net, x), _straight_line_forward(net, x), rtol=1e-12, atol=1e-14)


def test_forward_rejects_width_mismatch():
    from src.ndiff.net import forward_batch, net_init

    with pytest.raises(ValueError):
        forward_batch(net_init([3, 2]), np.zeros((4, 2)))


def test_gradient_of_zero_net_is_zero():
    from src.ndiff.graph import loss_backward, mean, net_forward_graph, square, sum_rows
    from src.ndiff.net import net_init

    net = net_init([3, 4, 2], seed=2)
    net = net.with_parameters([np.zeros_like(p) for p in net.parameters()])
    out = net_forward_graph(net, np.ones((5, 3)))
    tape = loss_backward(net, mean(sum_rows(square(out))))
    assert all(np.all(g == 0.0) for g in tape.parameters())


def test_gradient_of_linear_least_squares():
    from src.ndiff.graph import loss_backward, mean, net_forward_graph, square, sub, take_column
    from src.ndiff.net import DenseNet

    w = np.array([[0.5, -1.0, 2.0]])
    net = DenseNet(widths=(3, 1), weights=(w,), biases=(np.zeros(1),), activation="identity")
    x = np.array([1.0, 2.0, 3.0])
    y = 1.5
    out = take_column(net_forward_graph(net, x[None, :]), 0)
    tape = loss_backward(net, mean(square(sub(out, np.array([y])))))
    residual = float(w @ x) - y
    np.testing.assert_allclose(tape.weights[0][0], 2.0 * residual * x, rtol=1e-12)


def test_gradient_matches_central_differences_on_dsm_batch():
    from src.diffusion.losses import draw_dsm_batch, dsm_batch_loss
    from src.diffusion.model import NetField, TimeFeaturizer
    from src.diffusion.schedule import DiffusionSchedule
    from src.ndiff.graph import loss_backward
    from src.ndiff.net import net_init
    from src.targets.mixture import four_corner_mixture, mixture_sample

    featurizer = TimeFeaturizer(T=10.0, eps=1e-3)
    net = net_init([4, 6, 6, 2], seed=3)
    data = mixture_sample(four_corner_mixture(), 16, 0)
    batch = draw_dsm_batch(data, DiffusionSchedule(T=10.0), 16, 1)

    def loss(candidate):
        return dsm_batch_loss(NetField(candidate, featurizer), batch).item()

    tape = loss_backward(net, dsm_batch_loss(NetField(net, featurizer), batch))
    h = 1e-6
    params = net.parameters()
    worst = 0.0
    for k, p in enumerate(params):
        for index in np.ndindex(p.shape):
            shifted = [q.copy() for q in params]
            shifted[k][index] += h
            up = loss(net.with_parameters(shifted))
            shifted[k][index] -= 2 * h
            down = loss(net.with_parameters(shifted))
            numeric = (up - down) / (2 * h)
            analytic = tape.parameters()[k][index]
            worst = max(worst, abs(analytic - numeric) / max(abs(numeric), 1e-3))
    assert worst < 1e-4


def test_non_finite_loss_is_rejected():
    from src.ndiff.graph import constant, loss_backward
    from src.ndiff.net import net_init

    with pytest.raises(NonFiniteError):
        loss_backward(net_init([2, 2]), constant(np.nan))


def test_divergence_of_identity_field_is_dimension():
    from src.ndiff.divergence import divergence
    from src.ndiff.net import DenseNet

    w = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
    net = DenseNet(widths=(4, 2), weights=(w,), biases=(np.zeros(2),), activation="identity")
    assert divergence(net, np.array([3.0, -1.0]), np.array([0.2, 0.7])) == 2.0


def test_divergence_of_constant_field_is_zero():
    from src.ndiff.divergence import divergence
    from src.ndiff.net import DenseNet

    w = np.array([[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]])
    net = DenseNet(widths=(4, 2), weights=(w,), biases=(np.ones(2),), activation="identity")
    assert divergence(net, np.array([3.0, -1.0]), np.array([0.2, 0.7])) == 0.0


def test_divergence_matches_finite_differences():
    from src.ndiff.divergence import divergence_batch
    from src.ndiff.net import forward_batch, net_init

    rng = np.random.default_rng(4)
    net = net_init([4, 16, 16, 2], seed=9)
    points = rng.normal(size=(10, 2))
    features = rng.uniform(size=(10, 2))
    h = 1e-5
    trace = np.zeros(10)
    for i in range(2):
        step = np.zeros(2)
        step[i] = h
        up = forward_batch(net, np.concatenate([points + step, features], axis=1))[:, i]
        down = forward_batch(net, np.concatenate([points - step, features], axis=1))[:, i]
        trace += (up - down) / (2 * h)
    np.testing.assert_allclose(divergence_batch(net, points, features), trace, atol=1e-6)


def _scalar_net(value):
    from src.ndiff.net import DenseNet

    return DenseNet(widths=(1, 1), weights=(np.array([[value]]),), biases=(np.zeros(1),), activation="identity")


def test_sgd_step():
    from src.ndiff.optim import OPTIMIZER_SGD, init_optimizer, optimizer_step

    net = _scalar_net(1.0)
    state = init_optimizer(net, OPTIMIZER_SGD, learning_rate=0.1)
    tape = GradientTape(weights=(np.array([[2.0]]),), biases=(np.zeros(1),), loss=0.0)
    net, state = optimizer_step(net, tape, state)
    assert net.weights[0][0, 0] == pytest.approx(0.8)
    assert state.step == 1


def test_adam_zero_gradient_leaves_parameters():
    from src.ndiff.optim import init_optimizer, optimizer_step

    net = _scalar_net(1.5)
    state = init_optimizer(net)
    tape = GradientTape(weights=(np.zeros((1, 1)),), biases=(np.zeros(1),), loss=0.0)
    new_net, new_state = optimizer_step(net, tape, state)
    assert new_net.weights[0][0, 0] == 1.5
    assert new_state.step == 1


def test_adam_first_step_moves_each_parameter_by_learning_rate():
    from src.ndiff.net import net_init
    from src.ndiff.optim import init_optimizer, optimizer_step

    net = net_init([3, 4, 2], seed=4)
    rng = np.random.default_rng(12)
    grads = [z + 0.5 * np.sign(z) for z in (rng.normal(size=p.shape) for p in net.parameters())]
    n = net.n_layers
    tape = GradientTape(weights=tuple(grads[:n]), biases=tuple(grads[n:]), loss=1.0)
    new_net, _ = optimizer_step(net, tape, init_optimizer(net, learning_rate=0.01))
    for before, after, g in zip(net.parameters(), new_net.parameters(), grads):
        np.testing.assert_allclose(after - before, -0.01 * np.sign(g), rtol=0, atol=1e-9)


def test_non_finite_gradient_refuses_step():
    from src.ndiff.optim import init_optimizer, optimizer_step

    net = _scalar_net(1.0)
    state = init_optimizer(net)
    tape = GradientTape(weights=(np.array([[np.inf]]),), biases=(np.zeros(1),), loss=0.0)
    with pytest.raises(NonFiniteError):
        optimizer_step(net, tape, state)
    assert state.step == 0


def _spectral_net(w):
    from src.ndiff.net import DenseNet

    u = np.ones(w.shape[0]) / np.sqrt(w.shape[0])
    return DenseNet(
        widths=(w.shape[1], w.shape[0]),
        weights=(w,),
        biases=(np.zeros(w.shape[0]),),
        activation="identity",
        spectral_norm_enabled=True,
        power_iter_state=(u,),
    )


def test_spectral_normalize_diagonal():
    from src.ndiff.spectral import spectral_normalize

    net = spectral_normalize(_spectral_net(np.diag([3.0, 1.0])), n_power_iters=50)
    np.testing.assert_allclose(net.weights[0], np.diag([1.0, 1.0 / 3.0]), atol=1e-9)


def test_spectral_normalize_keeps_orthogonal():
    from src.ndiff.spectral import spectral_normalize

    q = np.array([[0.0, -1.0], [1.0, 0.0]])
    net = spectral_normalize(_spectral_net(q), n_power_iters=5)
    np.testing.assert_allclose(net.weights[0], q, atol=1e-6)


def test_spectral_normalize_random_matrix_against_svd():
    from src.ndiff.spectral import layer_spectral_norms, spectral_normalize

    w = np.random.default_rng(0).normal(size=(64, 64))
    net = spectral_normalize(_spectral_net(w), n_power_iters=50)
    assert abs(layer_spectral_norms(net)[0] - 1.0) < 1e-3
    assert abs(np.linalg.norm(net.power_iter_state[0]) - 1.0) < 1e-9


def test_spectral_normalize_leaves_zero_matrix():
    from src.ndiff.spectral import spectral_normalize

    net = spectral_normalize(_spectral_net(np.zeros((2, 2))))
    assert np.all(net.weights[0] == 0.0)


def test_spectral_normalize_requires_state():
    from src.ndiff.net import net_init
    from src.ndiff.spectral import spectral_normalize

    with pytest.raises(ValueError):
        spectral_normalize(net_init([2, 2]))


def test_checkpoint_round_trip(tmp_path):
    from src.ndiff.checkpoint import load_checkpoint, save_checkpoint
    from src.ndiff.net import net_init

    net = net_init([2, 8, 1], "relu", seed=3, spectral_norm=True)
    loaded = load_checkpoint(save_checkpoint(net, tmp_path / "nets" / "critic.ndiff"))
    assert loaded.widths == net.widths
    assert loaded.activation == "relu"
    assert all(np.array_equal(p, q) for p, q in zip(loaded.parameters(), net.parameters()))
    assert all(np.array_equal(p, q) for p, q in zip(loaded.power_iter_state, net.power_iter_state))


def test_checkpoint_rejects_foreign_file(tmp_path):
    from src.ndiff.checkpoint import load_checkpoint

    path = tmp_path / "bad.ndiff"
    path.write_bytes(b"something else\n\x00\x00")
    with pytest.raises(ValueError):
        load_checkpoint(path)
