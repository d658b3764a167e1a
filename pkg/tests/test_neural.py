import math
from itertools import product

import numpy as np
import pytest

from iterlearn import _kernels as K
from iterlearn.errors import ConfigError
from iterlearn.neural import (
    Mlp,
    TrainConfig,
    autoencoder_step,
    chain_forward,
    chain_gradient,
    forward,
    forward_chunked,
    glorot_bound,
    gradient,
    init_glorot,
    loss_value,
    map_indices,
    pair_probability,
    sgd_step,
)
from iterlearn.lang import bits_to_indices, decide, enumerate_space

import oracles


def test_glorot_bounds_and_zero_biases():
    net = init_glorot(2, 2, 2, np.random.default_rng(1))
    assert glorot_bound(2, 2) == pytest.approx(1.2247, abs=1e-4)
    assert np.all(np.abs(net.w_ih) <= math.sqrt(6 / 4))
    assert np.all(np.abs(net.w_ho) <= math.sqrt(6 / 4))
    assert not net.b_h.any() and not net.b_o.any()


def test_glorot_is_deterministic():
    a = init_glorot(5, 7, 5, np.random.default_rng(9))
    b = init_glorot(5, 7, 5, np.random.default_rng(9))
    assert a.same_as(b)


def test_glorot_statistics():
    rng = np.random.default_rng(2)
    draws = np.concatenate([init_glorot(8, 8, 8, rng).w_ih.ravel() for _ in range(157)])[:10_000]
    assert len(draws) == 10_000
    assert abs(draws.mean()) < 0.02
    assert np.abs(draws).max() <= math.sqrt(6 / 16)


def test_zero_net_outputs_one_half():
    net = Mlp.zeros(3, 4, 3)
    for x in enumerate_space(3):
        assert np.array_equal(forward(net, x), np.full(3, 0.5))


def test_single_unit_zero_preactivation():
    net = Mlp(np.array([[2.0]]), np.array([0.0]), np.array([[1.0]]), np.array([-0.5 - 0.5 * math.tanh(1.0)]))
    # sigma(2) = (1 + tanh(1)) / 2, so the output pre-activation is exactly zero up to rounding
    assert forward(net, [1])[0] == pytest.approx(0.5, abs=1e-15)


def test_forward_matches_straight_line_oracle():
    rng = np.random.default_rng(4)
    net = init_glorot(4, 4, 4, rng)
    net.b_h[:] = rng.normal(size=4)
    net.b_o[:] = rng.normal(size=4)
    for x in enumerate_space(4):
        expected = oracles.forward(net.w_ih, net.b_h, net.w_ho, net.b_o, x)
        np.testing.assert_allclose(forward(net, x), expected, rtol=0, atol=1e-12)
    np.testing.assert_allclose(
        forward_chunked(net, enumerate_space(4).astype(float)),
        forward(net, enumerate_space(4)), rtol=0, atol=1e-12,
    )


def test_forward_rejects_wrong_length():
    with pytest.raises(ValueError):
        forward(Mlp.zeros(3, 3, 3), [0, 1])


def test_pair_probability_examples():
    assert pair_probability([0.9, 0.2], [1, 0]) == pytest.approx(0.72)
    assert pair_probability([0.5] * 6, [1, 0, 1, 1, 0, 0]) == pytest.approx(0.5**6)
    p = [0.9, 0.2]
    best = max(product((0, 1), repeat=2), key=lambda t: pair_probability(p, t))
    assert best == tuple(decide(p))
    assert pair_probability(p, best) == pytest.approx(0.72)


@pytest.mark.parametrize("n", [1, 4, 7, 10])
def test_pair_probabilities_sum_to_one(n):
    net = init_glorot(n, n, n, np.random.default_rng(n))
    p = forward(net, enumerate_space(n)[-1])
    total = math.fsum(pair_probability(p, m) for m in enumerate_space(n))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_outputs_strictly_inside_unit_interval():
    net = init_glorot(6, 6, 6, np.random.default_rng(0))
    p = forward(net, enumerate_space(6))
    assert np.all((p > 0) & (p < 1))


def test_train_config_validation():
    assert TrainConfig().loss == "squared_error"
    with pytest.raises(ConfigError):
        TrainConfig(eta=0.0)
    with pytest.raises(ConfigError):
        TrainConfig(epochs=0)
    with pytest.raises(ConfigError):
        TrainConfig(loss="hinge")
    with pytest.raises(ConfigError):
        TrainConfig(reduction="max")


def test_zero_rate_step_leaves_parameters_and_reports_loss():
    # TrainConfig insists on eta > 0, so the zero-rate case goes through the kernel
    net = init_glorot(4, 4, 4, np.random.default_rng(5))
    before = net.flat()
    x = np.array([1.0, 0, 1, 0])
    t = np.array([0.0, 1, 1, 0])
    grads = tuple(np.empty_like(a) for a in net.params)
    value = K.supervised_step(net.params, x, t, 0.0, TrainConfig().loss_kind, grads)
    assert np.array_equal(net.flat(), before)
    assert value == pytest.approx(loss_value(forward(net, x), t))


def test_zero_rate_autoencoder_step():
    rng = np.random.default_rng(6)
    enc, dec = init_glorot(4, 4, 4, rng), init_glorot(4, 4, 4, rng)
    e0, d0 = enc.flat(), dec.flat()
    x = np.array([1.0, 1, 0, 0])
    g1 = tuple(np.empty_like(a) for a in enc.params)
    g2 = tuple(np.empty_like(a) for a in dec.params)
    value = K.chain_step(enc.params, dec.params, x, x, 0.0, TrainConfig().loss_kind, g1, g2)
    assert np.array_equal(enc.flat(), e0) and np.array_equal(dec.flat(), d0)
    assert value == pytest.approx(loss_value(chain_forward(enc, dec, x), x))


def test_repeated_steps_drive_loss_down():
    net = init_glorot(4, 4, 4, np.random.default_rng(7))
    x, t = np.array([1.0, 0, 0, 1]), np.array([0.0, 1, 0, 1])
    cfg = TrainConfig(eta=1.0)
    losses = [sgd_step(net, x, t, cfg) for _ in range(200)]
    assert all(b <= a for a, b in zip(losses, losses[1:]))
    assert losses[-1] < 0.05 * losses[0]
    assert net.steps == 200


@pytest.mark.parametrize("loss", ["cross_entropy", "squared_error"])
@pytest.mark.parametrize("reduction", ["sum", "mean"])
def test_gradient_matches_finite_differences(loss, reduction):
    rng = np.random.default_rng(11)
    for _ in range(100):
        n_in, n_h, n_out = rng.integers(1, 6, size=3)
        net = init_glorot(n_in, n_h, n_out, rng)
        x = rng.integers(0, 2, n_in).astype(float)
        t = rng.integers(0, 2, n_out).astype(float)
        _, g = gradient(net, x, t, loss, reduction)

        def f(theta):
            probe = net.copy()
            probe.set_flat(np.asarray(theta))
            return loss_value(forward(probe, x), t, loss, reduction)

        fd = np.array(oracles.finite_difference(f, net.flat()))
        assert np.linalg.norm(g - fd) <= 1e-6 * max(np.linalg.norm(fd), 1e-8)


def test_chain_gradient_matches_finite_differences():
    rng = np.random.default_rng(12)
    for _ in range(100):
        n, h = rng.integers(2, 6, size=2)
        enc, dec = init_glorot(n, h, n, rng), init_glorot(n, h, n, rng)
        x = rng.integers(0, 2, n).astype(float)
        _, g1, g2 = chain_gradient(enc, dec, x, x)
        split = enc.flat().size

        def f(theta):
            theta = np.asarray(theta)
            a, b = enc.copy(), dec.copy()
            a.set_flat(theta[:split])
            b.set_flat(theta[split:])
            return loss_value(chain_forward(a, b, x), x)

        fd = np.array(oracles.finite_difference(f, np.concatenate([enc.flat(), dec.flat()])))
        g = np.concatenate([g1, g2])
        assert np.linalg.norm(g - fd) <= 1e-6 * max(np.linalg.norm(fd), 1e-8)


def test_chain_uses_real_valued_middle_layer():
    rng = np.random.default_rng(13)
    enc, dec = init_glorot(3, 3, 3, rng), init_glorot(3, 3, 3, rng)
    x = np.array([1.0, 0, 1])
    middle = forward(enc, x)
    np.testing.assert_array_equal(chain_forward(enc, dec, x), forward(dec, middle))
    assert not np.array_equal(chain_forward(enc, dec, x), forward(dec, decide(middle)))


def test_autoencoder_step_updates_both_shared_networks():
    rng = np.random.default_rng(14)
    enc, dec = init_glorot(4, 4, 4, rng), init_glorot(4, 4, 4, rng)
    e0, d0 = enc.flat(), dec.flat()
    autoencoder_step(enc, dec, np.array([1.0, 0, 1, 1]), TrainConfig(eta=5.0))
    assert not np.array_equal(enc.flat(), e0)
    assert not np.array_equal(dec.flat(), d0)


def test_training_is_deterministic():
    def run():
        rng = np.random.default_rng(15)
        net = init_glorot(5, 5, 5, rng)
        cfg = TrainConfig(eta=2.0, loss="cross_entropy")
        for _ in range(300):
            sgd_step(net, rng.integers(0, 2, 5), rng.integers(0, 2, 5), cfg)
        return net.flat()

    assert np.array_equal(run(), run())


def test_map_indices_agrees_with_forward_and_decide():
    net = init_glorot(7, 9, 7, np.random.default_rng(16))
    idx = np.arange(128)
    expected = bits_to_indices(decide(forward(net, enumerate_space(7))))
    assert np.array_equal(map_indices(net, idx), expected)
