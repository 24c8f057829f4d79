import numpy as np
import pytest

from ecprune import Activation, Dataset, Layer, Network


def random_net(sizes, activations, seed, scale=0.8):
    """Net with random weights/biases/slopes; ``activations`` covers hidden layers."""
    rng = np.random.default_rng(seed)
    layers = []
    for ell, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        kind = activations[ell] if ell < len(sizes) - 2 else "identity"
        slope = float(rng.uniform(0.05, 0.5))
        layers.append(
            Layer(
                rng.normal(scale=scale, size=(n_out, n_in)),
                rng.normal(scale=0.3, size=n_out),
                Activation(kind, slope),
            )
        )
    return Network(tuple(layers))


def regression_data(n_in, n_out, n, seed):
    rng = np.random.default_rng(seed)
    return Dataset(rng.normal(size=(n, n_in)), rng.normal(size=(n, n_out)))


def classification_data(n_in, n_classes, n, seed):
    rng = np.random.default_rng(seed)
    return Dataset(
        rng.normal(size=(n, n_in)),
        rng.integers(0, n_classes, size=n),
        task="classification",
        num_classes=n_classes,
    )


def rel_err(a, b):
    """Norm-wise relative error of ``a`` against reference ``b``."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    denom = max(np.linalg.norm(b), 1e-12)
    return np.linalg.norm(a - b) / denom


@pytest.fixture
def small_net():
    return random_net([3, 4, 3, 2], ["prelu", "tanh"], seed=7)
