import numpy as np
import pytest

from conftest import random_net, regression_data
from ecprune import MaskSet, ec_scores, load_checkpoint, save_checkpoint, select_mask
from ecprune.serialization import CheckpointError


def test_network_round_trip_is_exact(tmp_path):
    net = random_net([5, 4, 3, 2], ["prelu", "tanh"], 0)
    p = tmp_path / "net.npz"
    save_checkpoint(p, net)
    back, extras = load_checkpoint(p)
    assert extras == {}
    assert back.sizes == net.sizes
    for a, b in zip(back.layers, net.layers):
        np.testing.assert_array_equal(a.weights, b.weights)
        np.testing.assert_array_equal(a.bias, b.bias)
        assert a.activation == b.activation


def test_masks_and_scores_ride_along(tmp_path):
    net = random_net([3, 4, 2], ["prelu"], 1)
    scores, comp = ec_scores(net, regression_data(3, 2, 10, 1))
    mask = select_mask(scores, 0.5)
    p = tmp_path / "ckpt.npz"
    save_checkpoint(p, net, mask=mask, scores=scores, compensation=comp)
    _, extras = load_checkpoint(p)
    assert MaskSet(extras["mask"]) == mask
    for a, b in zip(extras["scores"], scores):
        np.testing.assert_array_equal(a, b)


def test_rejects_foreign_files(tmp_path):
    p = tmp_path / "x.npz"
    np.savez(p, a=np.zeros(3))
    with pytest.raises(CheckpointError):
        load_checkpoint(p)
