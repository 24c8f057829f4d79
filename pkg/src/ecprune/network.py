"""Dense fully-connected networks: forward traces, output sensitivities, loss gradients.

Parameters are exposed as a flat list of arrays in a fixed order,
layer by layer: ``W``, ``b`` and, for PReLU layers, a shape-``(1,)`` slope
array. Gradients and optimizer state use the same order.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

PRELU_INIT_SLOPE = 0.25


class NetworkError(ValueError):
    """Raised on dimension mismatches or non-finite evaluations."""


class ActivationKind(str, enum.Enum):
    IDENTITY = "identity"
    PRELU = "prelu"
    TANH = "tanh"
    RELU = "relu"


@dataclass(frozen=True)
class Activation:
    kind: ActivationKind = ActivationKind.IDENTITY
    slope: float = PRELU_INIT_SLOPE

    def __post_init__(self):
        object.__setattr__(self, "kind", ActivationKind(self.kind))
        if not np.isfinite(self.slope):
            raise NetworkError("PReLU slope must be finite")

    @property
    def trainable(self) -> bool:
        return self.kind is ActivationKind.PRELU

    def __call__(self, a):
        k = self.kind
        if k is ActivationKind.IDENTITY:
            return a
        if k is ActivationKind.TANH:
            return np.tanh(a)
        if k is ActivationKind.RELU:
            return np.where(a >= 0, a, 0.0)
        return np.where(a >= 0, a, self.slope * a)

    def derivative(self, a):
        # right derivative at the kink
        k = self.kind
        if k is ActivationKind.IDENTITY:
            return np.ones_like(a)
        if k is ActivationKind.TANH:
            return 1.0 - np.tanh(a) ** 2
        if k is ActivationKind.RELU:
            return np.where(a >= 0, 1.0, 0.0)
        return np.where(a >= 0, 1.0, self.slope)


IDENTITY = Activation(ActivationKind.IDENTITY)


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray
    bias: np.ndarray
    activation: Activation = field(default=IDENTITY)

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, ndmin=2)
        b = np.array(self.bias, dtype=np.float64, ndmin=1)
        if w.ndim != 2 or b.ndim != 1:
            raise NetworkError("weights must be a matrix and bias a vector")
        if w.shape[0] != b.shape[0]:
            raise NetworkError(
                f"weights have {w.shape[0]} rows but bias has length {b.shape[0]}"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise NetworkError("layer parameters must be finite")
        w.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape


@dataclass(frozen=True)
class Network:
    """Ordered stack of dense layers; the last layer is always Identity."""

    layers: tuple[Layer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise NetworkError("a network needs at least one layer")
        for prev, cur in zip(layers, layers[1:]):
            if cur.weights.shape[1] != prev.weights.shape[0]:
                raise NetworkError(
                    f"layer widths do not chain: {prev.weights.shape} -> {cur.weights.shape}"
                )
        if layers[-1].activation.kind is not ActivationKind.IDENTITY:
            raise NetworkError("the output layer must use the Identity activation")
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].weights.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weights.shape[0]

    @property
    def sizes(self) -> list[int]:
        return [self.input_dim] + [layer.weights.shape[0] for layer in self.layers]

    @property
    def weight_shapes(self) -> list[tuple[int, int]]:
        return [layer.shape for layer in self.layers]

    @property
    def num_weights(self) -> int:
        """|W|: weight-matrix entries only."""
        return sum(layer.weights.size for layer in self.layers)

    @property
    def num_parameters(self) -> int:
        """|theta|: weights, biases and PReLU slopes."""
        return sum(p.size for p in self.parameters())

    def parameters(self) -> list[np.ndarray]:
        params = []
        for layer in self.layers:
            params.append(layer.weights.copy())
            params.append(layer.bias.copy())
            if layer.activation.trainable:
                params.append(np.array([layer.activation.slope]))
        return params

    def with_parameters(self, params) -> "Network":
        params = list(params)
        layers, k = [], 0
        for layer in self.layers:
            w, b = params[k], params[k + 1]
            k += 2
            act = layer.activation
            if act.trainable:
                act = replace(act, slope=float(params[k][0]))
                k += 1
            layers.append(Layer(w, b, act))
        if k != len(params):
            raise NetworkError(f"expected {k} parameter arrays, got {len(params)}")
        return Network(tuple(layers))

    def with_weights(self, weights) -> "Network":
        return Network(tuple(replace(l, weights=w) for l, w in zip(self.layers, weights)))


def build_network(sizes, activation="prelu", seed=0) -> Network:
    """Kaiming-uniform weights U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases.

    ``activation`` applies to every hidden layer; the output layer is Identity.
    """
    sizes = list(sizes)
    if len(sizes) < 2:
        raise NetworkError("need at least input and output sizes")
    rng = np.random.default_rng(seed)
    hidden = Activation(ActivationKind(activation))
    layers = []
    for ell, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = np.sqrt(6.0 / n_in)
        w = rng.uniform(-bound, bound, size=(n_out, n_in))
        act = IDENTITY if ell == len(sizes) - 2 else hidden
        layers.append(Layer(w, np.zeros(n_out), act))
    return Network(tuple(layers))


@dataclass(frozen=True)
class ForwardTrace:
    """Pre-activations ``a^l``, activations ``z^l`` (``z^0 = x``) and output.

    Arrays carry a leading batch axis when the input was a batch.
    """

    preactivations: list
    activations: list

    @property
    def output(self) -> np.ndarray:
        return self.activations[-1]

    def signal(self, net: Network, ell: int, i: int, j: int):
        """Signal ``W_ij z_j`` through one connection of layer ``ell`` (0-based)."""
        return net.layers[ell].weights[i, j] * self.activations[ell][..., j]


def _check_input(net: Network, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != net.input_dim:
        raise NetworkError(f"input of shape {x.shape} does not match n_in={net.input_dim}")
    return x


def _run(net: Network, weights, x) -> ForwardTrace:
    pre, acts = [], [x]
    z = x
    for ell, (layer, w) in enumerate(zip(net.layers, weights)):
        with np.errstate(over="ignore", invalid="ignore"):
            a = z @ w.T + layer.bias
            z = layer.activation(a)
        if not np.all(np.isfinite(z)):
            raise NetworkError(f"non-finite activation in layer {ell + 1}")
        pre.append(a)
        acts.append(z)
    return ForwardTrace(pre, acts)


def forward(net: Network, x) -> ForwardTrace:
    """Evaluate ``net`` on one sample ``(n_in,)`` or a batch ``(N, n_in)``."""
    x = _check_input(net, x)
    return _run(net, [layer.weights for layer in net.layers], x)


def masked_forward(net: Network, mask, x) -> ForwardTrace:
    """Forward pass with weights replaced by ``M * W`` (mask applied lazily)."""
    x = _check_input(net, x)
    return _run(net, _masked_weights(net, mask), x)


def _masked_weights(net: Network, mask):
    if mask is None:
        return [layer.weights for layer in net.layers]
    ms = list(mask)
    if len(ms) != len(net.layers):
        raise NetworkError(f"mask has {len(ms)} layers, network has {len(net.layers)}")
    out = []
    for layer, m in zip(net.layers, ms):
        m = np.asarray(m)
        if m.shape != layer.weights.shape:
            raise NetworkError(f"mask shape {m.shape} != weight shape {layer.weights.shape}")
        out.append(np.where(m != 0, layer.weights, 0.0))
    return out


def output_bias_jacobian(net: Network, x, trace: ForwardTrace | None = None) -> list:
    """Sensitivities ``g[l][..., k, i] = dy_k / db^l_i``.

    Computed with one reverse sweep per output component, all components
    propagated together. For a single sample each entry has shape
    ``(n_out, n_l)``; for a batch ``(N, n_out, n_l)``.
    The weight sensitivity follows as ``dy_k/dW^l_ij = g[l][k, i] * z^{l-1}_j``.
    """
    if trace is None:
        trace = forward(net, x)
    n_out = net.output_dim
    batched = trace.activations[0].ndim == 2
    g = np.eye(n_out)
    if batched:
        g = np.broadcast_to(g, (trace.activations[0].shape[0], n_out, n_out))
    sens = [None] * len(net.layers)
    sens[-1] = np.array(g)
    for ell in range(len(net.layers) - 2, -1, -1):
        g = (g @ net.layers[ell + 1].weights) * net.layers[ell].activation.derivative(
            trace.preactivations[ell]
        )[..., None, :]
        if not np.all(np.isfinite(g)):
            raise NetworkError(f"non-finite sensitivity in layer {ell + 1}")
        sens[ell] = g
    return sens


def loss_gradient(net: Network, mask, inputs, targets, loss) -> tuple[float, list]:
    """Mean-over-batch loss and its gradient w.r.t. ``net.parameters()``.

    Entries of the weight gradient where ``mask == 0`` are exactly zero.
    ``loss`` is a :class:`ecprune.training.LossKind`.
    """
    from .training import loss_value_and_output_grad

    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[0] == 0:
        raise NetworkError("loss_gradient needs a nonempty (N, n_in) batch")
    weights = _masked_weights(net, mask)
    trace = _run(net, weights, _check_input(net, inputs))
    value, delta = loss_value_and_output_grad(trace.output, targets, loss)

    grads = []
    for ell in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[ell]
        a = trace.preactivations[ell]
        layer_grads = []
        if layer.activation.trainable:
            # delta currently holds dL/dz^l
            layer_grads.append(np.array([np.sum(delta * np.where(a >= 0, 0.0, a))]))
        delta = delta * layer.activation.derivative(a)
        gw = delta.T @ trace.activations[ell]
        if mask is not None:
            gw = np.where(np.asarray(list(mask)[ell]) != 0, gw, 0.0)
        layer_grads.append(delta.sum(axis=0))
        layer_grads.append(gw)
        grads.extend(layer_grads)
        if ell > 0:
            delta = delta @ weights[ell]
    grads.reverse()
    return value, grads
