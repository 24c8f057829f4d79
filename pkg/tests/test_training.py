import math

import numpy as np
import pytest

from conftest import classification_data, random_net, regression_data
from ecprune import AdamState, Dataset, Layer, LossKind, Network, TrainConfig, adam_step, loss, train
from ecprune.training import TrainingError


def test_mse_zero_when_exact():
    net = Network((Layer([[2.0]], [1.0]),))
    data = Dataset([[0.0], [1.0], [2.0]], [[1.0], [3.0], [5.0]])
    assert loss(net, None, data, LossKind.MEAN_SQUARED_ERROR) == 0.0


def test_cross_entropy_uniform_logits():
    net = Network((Layer(np.zeros((2, 1)), [0.0, 0.0]),))
    data = Dataset([[1.0]], [0], task="classification", num_classes=2)
    assert loss(net, None, data, LossKind.SOFTMAX_CROSS_ENTROPY) == pytest.approx(math.log(2), rel=1e-15)


def _naive_loss(net, data, kind):
    from ecprune.verification import naive_output

    total = 0.0
    for x, t in zip(data.inputs, data.targets):
        y = naive_output(net, x)
        if kind is LossKind.MEAN_SQUARED_ERROR:
            total += sum((a - b) ** 2 for a, b in zip(y, t)) / len(y)
        else:
            total += math.log(sum(math.exp(v) for v in y)) - y[t]
    return total / len(data)


@pytest.mark.parametrize("seed", range(3))
def test_loss_matches_naive(seed):
    net = random_net([4, 5, 3], ["tanh"], seed)
    reg = regression_data(4, 3, 9, seed)
    cls = classification_data(4, 3, 9, seed)
    for data, kind in [(reg, LossKind.MEAN_SQUARED_ERROR), (cls, LossKind.SOFTMAX_CROSS_ENTROPY)]:
        assert loss(net, None, data, kind) == pytest.approx(_naive_loss(net, data, kind), rel=1e-12)


def test_loss_task_mismatch():
    net = random_net([4, 3], [], 0)
    with pytest.raises(TrainingError):
        loss(net, None, regression_data(4, 3, 5, 0), LossKind.SOFTMAX_CROSS_ENTROPY)
    with pytest.raises(TrainingError):
        loss(net, None, classification_data(4, 3, 5, 0), LossKind.MEAN_SQUARED_ERROR)


def test_adam_zero_gradient_keeps_params():
    params = [np.array([1.0, -2.0]), np.array([[0.5]])]
    state = AdamState.zeros_like(params)
    new, state = adam_step(state, params, [np.zeros(2), np.zeros((1, 1))], TrainConfig())
    for a, b in zip(new, params):
        np.testing.assert_array_equal(a, b)
    assert state.step == 1


def test_adam_first_step_is_signed_learning_rate():
    cfg = TrainConfig(learning_rate=1e-3)
    g = np.array([3.0, -0.2, 50.0])
    p = np.zeros(3)
    (new,), _ = adam_step(AdamState.zeros_like([p]), [p], [g], cfg)
    assert np.all(np.abs(new + cfg.learning_rate * np.sign(g)) < cfg.learning_rate * 1e-6)


def _scalar_adam(p, grad_fn, steps, lr=1e-3, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    for t in range(1, steps + 1):
        g = grad_fn(p)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p = p - lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
    return p


def test_adam_trajectory_matches_scalar_oracle():
    cfg = TrainConfig(learning_rate=0.1)
    grad = lambda p: 2.0 * (p - 3.0)  # noqa: E731
    p = [np.array([0.5])]
    state = AdamState.zeros_like(p)
    for _ in range(3):
        p, state = adam_step(state, p, [grad(p[0])], cfg)
    assert p[0][0] == pytest.approx(_scalar_adam(0.5, grad, 3, lr=0.1), abs=1e-12)


def test_adam_rejects_non_finite_gradient():
    p = [np.zeros(2)]
    with pytest.raises(TrainingError):
        adam_step(AdamState.zeros_like(p), p, [np.array([np.nan, 0.0])], TrainConfig())


def test_train_zero_epochs_is_identity(small_net):
    data = regression_data(3, 2, 10, 0)
    res = train(small_net, None, data, TrainConfig(epochs=0), LossKind.MEAN_SQUARED_ERROR)
    assert res.history == []
    for a, b in zip(res.network.parameters(), small_net.parameters()):
        np.testing.assert_array_equal(a, b)


def test_scalar_regression_converges():
    net = Network((Layer([[0.3]], [0.0]),))
    data = Dataset([[1.0]], [[2.0]])
    cfg = TrainConfig(epochs=4000, batch_size=1, learning_rate=1e-2, fit_biases=False)
    res = train(net, None, data, cfg, LossKind.MEAN_SQUARED_ERROR)
    assert abs(res.network.layers[0].weights[0, 0] - 2.0) < 1e-3
    assert res.history[-1] < res.history[0]


def test_masked_training_keeps_pruned_weights_zero():
    net = random_net([4, 6, 2], ["prelu"], 1)
    data = regression_data(4, 2, 40, 1)
    rng = np.random.default_rng(0)
    mask = [rng.integers(0, 2, size=s) for s in net.weight_shapes]
    current, state = net, None
    for _ in range(3):
        res = train(current, mask, data, TrainConfig(epochs=1, batch_size=8, learning_rate=0.05),
                    LossKind.MEAN_SQUARED_ERROR, state=state)
        current, state = res.network, res.state
        for m, layer in zip(mask, current.layers):
            assert np.all(layer.weights[m == 0] == 0.0)
    # surviving weights did move
    assert not np.array_equal(current.layers[0].weights[mask[0] == 1], net.layers[0].weights[mask[0] == 1])


def test_pruned_moments_are_reset_across_prune_boundary():
    net = random_net([3, 4, 1], ["tanh"], 2)
    data = regression_data(3, 1, 16, 2)
    first = train(net, None, data, TrainConfig(epochs=2, batch_size=4), LossKind.MEAN_SQUARED_ERROR)
    mask = [np.ones(s) for s in net.weight_shapes]
    mask[0][0, :] = 0
    res = train(first.network, mask, data, TrainConfig(epochs=1, batch_size=4), LossKind.MEAN_SQUARED_ERROR,
                state=first.state)
    assert np.all(res.state.m[0][0] == 0) and np.all(res.state.v[0][0] == 0)
    assert res.state.step == first.state.step + 4


def test_train_is_deterministic():
    net = random_net([3, 5, 3], ["prelu"], 0)
    data = classification_data(3, 3, 50, 0)
    cfg = TrainConfig(epochs=3, batch_size=7, seed=4)
    a = train(net, None, data, cfg, LossKind.SOFTMAX_CROSS_ENTROPY)
    b = train(net, None, data, cfg, LossKind.SOFTMAX_CROSS_ENTROPY)
    assert a.history == b.history
    for p, q in zip(a.network.parameters(), b.network.parameters()):
        np.testing.assert_array_equal(p, q)
    # prelu slopes are trained
    assert a.network.layers[0].activation.slope != net.layers[0].activation.slope


def test_train_config_validation():
    with pytest.raises(TrainingError):
        TrainConfig(epochs=-1)
    with pytest.raises(TrainingError):
        TrainConfig(batch_size=0)
    with pytest.raises(TrainingError):
        TrainConfig(beta1=1.0)
