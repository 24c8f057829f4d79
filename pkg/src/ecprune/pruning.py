"""Importance scores, bias compensation, mask selection and pruned networks.

Elimination-compensation (EC) scores replace a weight ``W_ij`` by zero and
shift the adjacent bias ``b_i`` by the ``delta_b`` minimising the expected
squared linearised output change

    sum_k E_x[(dy_k/dW_ij * W_ij - dy_k/db_i * delta_b)^2].

With ``dy_k/dW_ij = g_ki z_j`` (``g`` the bias sensitivities) the minimiser and
the minimum only need three per-layer moment accumulators::

    D_i  = sum_k E[g_ki^2]
    B_ij = sum_k E[g_ki^2 z_j]
    A_ij = sum_k E[g_ki^2 z_j^2]

    delta_b_ij = W_ij B_ij / D_i
    I_ij       = W_ij^2 (A_ij - B_ij^2 / D_i)

so the whole score set costs one forward and ``n_out`` backward sweeps per
sample instead of one network evaluation per weight.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .network import Network, NetworkError, forward, loss_gradient, output_bias_jacobian
from .training import LossKind


class PruningError(ValueError):
    pass


class LayerArrays:
    """Per-layer matrices aligned with a network's weight matrices."""

    def __init__(self, layers):
        self.layers = tuple(np.array(a, dtype=self._dtype) for a in layers)

    _dtype = np.float64

    def __iter__(self):
        return iter(self.layers)

    def __len__(self):
        return len(self.layers)

    def __getitem__(self, ell):
        return self.layers[ell]

    def __eq__(self, other):
        return (
            type(self) is type(other)
            and len(self) == len(other)
            and all(np.array_equal(a, b) for a, b in zip(self, other))
        )

    def __repr__(self):
        shapes = ", ".join(f"{a.shape[0]}x{a.shape[1]}" for a in self.layers)
        return f"{type(self).__name__}({shapes})"

    @property
    def shapes(self):
        return [a.shape for a in self.layers]

    @property
    def size(self) -> int:
        return sum(a.size for a in self.layers)

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.layers])

    @classmethod
    def zeros(cls, shapes):
        return cls([np.zeros(s) for s in shapes])


class MaskSet(LayerArrays):
    _dtype = np.int8

    def __init__(self, layers):
        super().__init__(layers)
        for a in self.layers:
            if not np.all((a == 0) | (a == 1)):
                raise PruningError("mask entries must be 0 or 1")

    @classmethod
    def ones(cls, shapes):
        return cls([np.ones(s) for s in shapes])

    def nonzero_count(self) -> int:
        return int(sum(np.count_nonzero(a) for a in self.layers))


class ScoreSet(LayerArrays):
    pass


class CompensationSet(LayerArrays):
    pass


class Strategy(str, enum.Enum):
    ELIM_COMPENSATION = "ec"
    NONLINEAR_DIRECT = "nonlinear"
    MAGNITUDE = "magnitude"
    GRADIENT_MAGNITUDE = "gradient_magnitude"
    RANDOM = "random"

    @property
    def compensates(self) -> bool:
        return self in (Strategy.ELIM_COMPENSATION, Strategy.NONLINEAR_DIRECT)


@dataclass(frozen=True)
class PruneConfig:
    ratio: float = 0.5
    strategy: Strategy = Strategy.ELIM_COMPENSATION
    expectation_subset: int | None = None
    dead_neuron_eps: float = 1e-12
    seed: int = 0
    batch_size: int = 512

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if not 0 <= self.ratio <= 1:
            raise PruningError("pruning ratio must lie in [0, 1]")


def expectation_inputs(data, cfg: PruneConfig) -> np.ndarray:
    """Samples over which E_x is taken: all of them or a seeded subsample."""
    x = data.inputs
    if x.shape[0] == 0:
        raise PruningError("empty dataset")
    k = cfg.expectation_subset
    if k is not None and k < x.shape[0]:
        idx = np.sort(np.random.default_rng(cfg.seed).choice(x.shape[0], size=k, replace=False))
        x = x[idx]
    return x


def ec_moments(net: Network, inputs, batch_size: int = 512):
    """Empirical moments ``(A, B, D)`` per layer, averaged over ``inputs``."""
    n = inputs.shape[0]
    A = [np.zeros(s) for s in net.weight_shapes]
    B = [np.zeros(s) for s in net.weight_shapes]
    D = [np.zeros(s[0]) for s in net.weight_shapes]
    for start in range(0, n, batch_size):
        x = inputs[start : start + batch_size]
        trace = forward(net, x)
        sens = output_bias_jacobian(net, x, trace)
        for ell, g in enumerate(sens):
            s = np.einsum("nki,nki->ni", g, g)
            z = trace.activations[ell]
            D[ell] += s.sum(axis=0)
            B[ell] += s.T @ z
            A[ell] += s.T @ (z * z)
    for ell in range(len(net.layers)):
        A[ell] /= n
        B[ell] /= n
        D[ell] /= n
        if not (np.all(np.isfinite(A[ell])) and np.all(np.isfinite(B[ell]))):
            raise PruningError(f"non-finite moments in layer {ell + 1}")
    return A, B, D


def ec_scores(net: Network, data, cfg: PruneConfig = PruneConfig()):
    """Elimination-compensation importance and optimal bias compensation."""
    A, B, D = ec_moments(net, expectation_inputs(data, cfg), cfg.batch_size)
    scores, comps = [], []
    for layer, a, b, d in zip(net.layers, A, B, D):
        w = layer.weights
        alive = d >= cfg.dead_neuron_eps
        safe_d = np.where(alive, d, 1.0)[:, None]
        comp = np.where(alive[:, None], w * b / safe_d, 0.0)
        # rounding can push a zero-variance minimum slightly negative
        score = np.where(alive[:, None], np.maximum(w * w * (a - b * b / safe_d), 0.0), 0.0)
        scores.append(score)
        comps.append(comp)
    return ScoreSet(scores), CompensationSet(comps)


def nonlinear_scores(net: Network, data, cfg: PruneConfig = PruneConfig()):
    """Brute-force importance with mean-signal compensation.

    Each weight is removed on its own, its bias shifted by ``W_ij E[z_j]``,
    and the mean squared output change over the data is measured. This costs
    one partial forward pass over the data per weight.
    """
    x = expectation_inputs(data, cfg)
    trace = forward(net, x)
    y0 = trace.output
    scores, comps = [], []
    for ell, layer in enumerate(net.layers):
        z_in = trace.activations[ell]
        comp = layer.weights * z_in.mean(axis=0)[None, :]
        score = np.zeros(layer.shape)
        for i in range(layer.shape[0]):
            a_i = trace.preactivations[ell][:, i]
            for j in range(layer.shape[1]):
                w = layer.weights[i, j]
                if w == 0.0:
                    continue
                a_new = a_i - w * z_in[:, j] + comp[i, j]
                y = _propagate_from(net, trace, ell, i, a_new)
                score[i, j] = np.mean(np.sum((y0 - y) ** 2, axis=1))
        scores.append(score)
        comps.append(comp)
    return ScoreSet(scores), CompensationSet(comps)


def _propagate_from(net: Network, trace, ell: int, i: int, a_new):
    """Output after replacing unit ``i``'s pre-activation in layer ``ell``."""
    layer = net.layers[ell]
    z = trace.activations[ell + 1].copy()
    z[:, i] = layer.activation(a_new)
    for later in net.layers[ell + 1 :]:
        z = later.activation(z @ later.weights.T + later.bias)
    return z


def magnitude_scores(net: Network) -> ScoreSet:
    return ScoreSet([np.abs(layer.weights) for layer in net.layers])


def gradient_magnitude_scores(net: Network, data, kind) -> ScoreSet:
    """``|W * dL/dW|`` with the full-dataset mean loss gradient."""
    _, grads = loss_gradient(net, None, data.inputs, data.targets, LossKind(kind))
    out, k = [], 0
    for layer in net.layers:
        out.append(np.abs(layer.weights * grads[k]))
        k += 3 if layer.activation.trainable else 2
    return ScoreSet(out)


def random_scores(net: Network, seed: int) -> ScoreSet:
    rng = np.random.default_rng(seed)
    return ScoreSet([rng.uniform(size=s) for s in net.weight_shapes])


def num_to_prune(total: int, ratio: float) -> int:
    # Python's round() is half-to-even
    return int(round(ratio * total))


def select_mask(scores: ScoreSet, ratio: float) -> MaskSet:
    """Prune the ``round(r |W|)`` globally smallest scores.

    Ties go to the earlier entry in (layer, row, column) order.
    """
    if not 0 <= ratio <= 1:
        raise PruningError("pruning ratio must lie in [0, 1]")
    flat = scores.flat()
    if not np.all(np.isfinite(flat)):
        raise PruningError("scores must be finite")
    n_prune = num_to_prune(flat.size, ratio)
    keep = np.ones(flat.size, dtype=np.int8)
    keep[np.argsort(flat, kind="stable")[:n_prune]] = 0
    out, offset = [], 0
    for shape in scores.shapes:
        size = shape[0] * shape[1]
        out.append(keep[offset : offset + size].reshape(shape))
        offset += size
    return MaskSet(out)


def apply_prune(net: Network, mask: MaskSet, comp: CompensationSet | None = None) -> Network:
    """Zero masked weights; add the compensations of pruned entries to their biases."""
    if list(mask.shapes) != net.weight_shapes:
        raise NetworkError(f"mask shapes {mask.shapes} != weight shapes {net.weight_shapes}")
    if comp is not None and list(comp.shapes) != net.weight_shapes:
        raise NetworkError("compensation shapes do not match the network")
    layers = []
    for ell, layer in enumerate(net.layers):
        m = mask[ell] != 0
        if m.all():
            layers.append(layer)
            continue
        w = np.where(m, layer.weights, 0.0)
        b = layer.bias
        if comp is not None:
            b = b + np.where(m, 0.0, comp[ell]).sum(axis=1)
        layers.append(replace(layer, weights=w, bias=b))
    return Network(tuple(layers))


def compute_scores(net: Network, data, cfg: PruneConfig, kind=None):
    """Dispatch on ``cfg.strategy``; non-compensating strategies get zero compensation."""
    strategy = cfg.strategy
    if strategy is Strategy.ELIM_COMPENSATION:
        return ec_scores(net, data, cfg)
    if strategy is Strategy.NONLINEAR_DIRECT:
        return nonlinear_scores(net, data, cfg)
    if strategy is Strategy.MAGNITUDE:
        scores = magnitude_scores(net)
    elif strategy is Strategy.GRADIENT_MAGNITUDE:
        if kind is None:
            raise PruningError("gradient-magnitude scores need a loss kind")
        scores = gradient_magnitude_scores(net, data, kind)
    else:
        scores = random_scores(net, cfg.seed)
    return scores, CompensationSet.zeros(net.weight_shapes)


def pruning_ratio(mask: MaskSet, original_count: int) -> float:
    return 1.0 - mask.nonzero_count() / original_count
