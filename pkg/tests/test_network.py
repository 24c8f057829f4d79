import numpy as np
import pytest

from conftest import random_net, regression_data, rel_err
from ecprune import (
    Activation,
    Layer,
    LossKind,
    Network,
    build_network,
    forward,
    loss_gradient,
    masked_forward,
    output_bias_jacobian,
)
from ecprune.network import NetworkError
from ecprune.training import loss_value_and_output_grad
from ecprune.verification import FdSpec, fd_jacobian, fd_loss_gradient, naive_output


def test_single_affine_layer():
    net = Network((Layer([[1.0, 2.0]], [0.0]),))
    assert forward(net, [3.0, 4.0]).output.tolist() == [11.0]


def test_zero_weights_give_last_bias():
    net = Network(
        (
            Layer(np.zeros((3, 2)), [1.0, -2.0, 0.5]),
            Layer(np.zeros((2, 3)), [0.25, -4.0]),
        )
    )
    np.testing.assert_array_equal(forward(net, [7.0, -1.0]).output, [0.25, -4.0])


@pytest.mark.parametrize("seed", range(5))
def test_forward_matches_naive_evaluator(seed):
    net = random_net([4, 5, 3, 2], ["prelu", "tanh"], seed)
    x = np.random.default_rng(seed).normal(size=4)
    np.testing.assert_allclose(forward(net, x).output, naive_output(net, x), rtol=1e-12, atol=1e-14)


def test_batch_forward_matches_per_sample(small_net):
    x = np.random.default_rng(0).normal(size=(6, 3))
    batch = forward(small_net, x).output
    for k in range(6):
        np.testing.assert_allclose(batch[k], forward(small_net, x[k]).output, rtol=1e-14)


def test_trace_signal_and_activation_consistency(small_net):
    x = np.array([0.3, -1.2, 2.0])
    tr = forward(small_net, x)
    assert len(tr.activations) == len(small_net.layers) + 1
    for layer, a, z in zip(small_net.layers, tr.preactivations, tr.activations[1:]):
        np.testing.assert_array_equal(z, layer.activation(a))
    assert tr.signal(small_net, 1, 2, 0) == small_net.layers[1].weights[2, 0] * tr.activations[1][0]


def test_dimension_errors():
    net = build_network([3, 2, 1], seed=0)
    with pytest.raises(NetworkError):
        forward(net, [1.0, 2.0])
    with pytest.raises(NetworkError):
        Network((Layer(np.ones((2, 3)), np.zeros(2)), Layer(np.ones((1, 3)), np.zeros(1))))
    with pytest.raises(NetworkError):
        Layer(np.ones((2, 3)), np.zeros(3))
    with pytest.raises(NetworkError):
        Network((Layer(np.ones((1, 3)), np.zeros(1), Activation("tanh")),))


def test_non_finite_output_names_layer():
    net = Network((Layer([[1e200]], [0.0], Activation("prelu")), Layer([[1e200]], [0.0])))
    with pytest.raises(NetworkError, match="layer 2"):
        forward(net, [1e10])


def test_masked_forward_identity_and_zero_masks(small_net):
    x = np.random.default_rng(1).normal(size=(5, 3))
    ones = [np.ones(s) for s in small_net.weight_shapes]
    np.testing.assert_array_equal(masked_forward(small_net, ones, x).output, forward(small_net, x).output)
    single = Network((Layer([[2.0, -3.0]], [0.7]),))
    assert masked_forward(single, [np.zeros((1, 2))], [5.0, 1.0]).output.tolist() == [0.7]


@pytest.mark.parametrize("seed", range(3))
def test_masked_forward_equals_eager_masking(seed):
    net = random_net([4, 6, 5, 3], ["tanh", "prelu"], seed)
    rng = np.random.default_rng(seed + 10)
    mask = [rng.integers(0, 2, size=s) for s in net.weight_shapes]
    eager = net.with_weights([m * layer.weights for m, layer in zip(mask, net.layers)])
    x = rng.normal(size=(7, 4))
    np.testing.assert_array_equal(masked_forward(net, mask, x).output, forward(eager, x).output)


def test_masked_forward_shape_mismatch(small_net):
    with pytest.raises(NetworkError):
        masked_forward(small_net, [np.ones((4, 3)), np.ones((3, 3))], np.zeros(3))


def test_last_layer_sensitivity_is_identity():
    rng = np.random.default_rng(3)
    net = Network((Layer(rng.normal(size=(3, 2)), rng.normal(size=3)),))
    g = output_bias_jacobian(net, rng.normal(size=2))
    np.testing.assert_array_equal(g[0], np.eye(3))
    deep = random_net([2, 4, 3], ["prelu"], 4)
    np.testing.assert_array_equal(output_bias_jacobian(deep, [1.0, -1.0])[-1], np.eye(3))


@pytest.mark.parametrize("acts", [["prelu"], ["tanh", "prelu"], ["relu", "identity"]])
def test_bias_sensitivity_matches_finite_differences(acts):
    sizes = [3] + [4] * len(acts) + [2]
    net = random_net(sizes, acts, seed=11)
    x = np.array([0.4, -0.9, 1.3])
    g = output_bias_jacobian(net, x)
    fd = fd_jacobian(net, x, "biases", FdSpec(1e-5))
    for ours, ref in zip(g, fd):
        assert rel_err(ours, ref) < 1e-6


def test_weight_sensitivity_factorises(small_net):
    x = np.array([1.1, 0.2, -0.7])
    tr = forward(small_net, x)
    g = output_bias_jacobian(small_net, x, tr)
    fd = fd_jacobian(small_net, x, "weights")
    for ell, ref in enumerate(fd):
        ours = g[ell][:, :, None] * tr.activations[ell][None, None, :]
        assert rel_err(ours, ref) < 1e-6


def test_batched_jacobian_matches_single(small_net):
    x = np.random.default_rng(2).normal(size=(4, 3))
    batched = output_bias_jacobian(small_net, x)
    for k in range(4):
        for ell, g in enumerate(output_bias_jacobian(small_net, x[k])):
            np.testing.assert_allclose(batched[ell][k], g, rtol=1e-13, atol=1e-15)


def _mse(outs, targets):
    return loss_value_and_output_grad(outs, targets, LossKind.MEAN_SQUARED_ERROR)[0]


def test_loss_gradient_zero_at_minimum():
    net = Network((Layer(np.zeros((2, 3)), [0.5, -1.0]),))
    x = np.random.default_rng(0).normal(size=(4, 3))
    targets = np.tile([0.5, -1.0], (4, 1))
    value, grads = loss_gradient(net, None, x, targets, LossKind.MEAN_SQUARED_ERROR)
    assert value == 0.0
    for g in grads:
        np.testing.assert_allclose(g, 0.0, atol=1e-15)


@pytest.mark.parametrize("seed", range(3))
def test_loss_gradient_matches_finite_differences(seed):
    net = random_net([3, 4, 3, 2], ["prelu", "tanh"], seed)
    data = regression_data(3, 2, 5, seed)
    _, grads = loss_gradient(net, None, data.inputs, data.targets, LossKind.MEAN_SQUARED_ERROR)
    fd = fd_loss_gradient(net, data.inputs, data.targets, _mse)
    assert len(grads) == len(fd) == len(net.parameters())
    for ours, ref in zip(grads, fd):
        assert rel_err(ours, ref) < 1e-6


def test_loss_gradient_respects_mask(small_net):
    data = regression_data(3, 2, 6, 0)
    mask = [np.ones(s) for s in small_net.weight_shapes]
    mask[0][1, 2] = 0
    mask[2][0, 0] = 0
    _, grads = loss_gradient(small_net, mask, data.inputs, data.targets, LossKind.MEAN_SQUARED_ERROR)
    # parameter order: W1, b1, slope1, W2, b2, W3, b3
    assert grads[0][1, 2] == 0.0
    assert grads[5][0, 0] == 0.0
    assert np.count_nonzero(grads[0]) == grads[0].size - 1


def test_loss_gradient_empty_batch(small_net):
    with pytest.raises(NetworkError):
        loss_gradient(small_net, None, np.zeros((0, 3)), np.zeros((0, 2)), LossKind.MEAN_SQUARED_ERROR)


def test_parameter_round_trip_and_counts():
    net = build_network([5, 4, 3], "prelu", seed=1)
    assert net.num_weights == 5 * 4 + 4 * 3
    assert net.num_parameters == net.num_weights + 4 + 3 + 1
    again = net.with_parameters(net.parameters())
    for a, b in zip(again.parameters(), net.parameters()):
        np.testing.assert_array_equal(a, b)
    assert net.layers[0].activation.slope == 0.25


def test_kaiming_uniform_bounds():
    net = build_network([50, 40, 1], seed=3)
    bound = np.sqrt(6 / 50)
    w = net.layers[0].weights
    assert np.all(np.abs(w) <= bound) and w.max() > 0.9 * bound
    assert np.all(net.layers[0].bias == 0)


def test_kink_uses_right_derivative():
    act = Activation("prelu", 0.1)
    assert act.derivative(np.array([0.0]))[0] == 1.0
    assert Activation("relu").derivative(np.array([0.0]))[0] == 1.0
