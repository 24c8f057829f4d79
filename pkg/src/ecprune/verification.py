"""Slow, independent oracles for checking the library.

Nothing here calls the forward/backward code in :mod:`ecprune.network`; the
networks are evaluated with explicit per-neuron loops.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_FD_PARAMS = 10_000


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class FdSpec:
    step: float = 1e-5
    scheme: str = "central"

    def __post_init__(self):
        if not self.step > 0:
            raise OracleError("finite-difference step must be positive")
        if self.scheme != "central":
            raise OracleError("only central differences are supported")


def _act(kind, slope, a):
    if kind == "identity":
        return a
    if kind == "tanh":
        return math.tanh(a)
    if kind == "relu":
        return a if a >= 0 else 0.0
    return a if a >= 0 else slope * a


def _unpack(net):
    """Plain nested lists: [(W rows, b, kind, slope), ...]."""
    return [
        (
            [list(map(float, row)) for row in layer.weights],
            list(map(float, layer.bias)),
            layer.activation.kind.value,
            float(layer.activation.slope),
        )
        for layer in net.layers
    ]


def naive_forward(layers, x):
    z = [float(v) for v in x]
    for w, b, kind, slope in layers:
        z = [_act(kind, slope, sum(wij * zj for wij, zj in zip(row, z)) + bi) for row, bi in zip(w, b)]
    return z


def naive_output(net, x) -> np.ndarray:
    return np.array(naive_forward(_unpack(net), x))


def fd_jacobian(net, x, target: str = "weights", spec: FdSpec = FdSpec()) -> list:
    """Central-difference ``dy/dp`` for every parameter of one kind.

    Returns one array per layer of shape ``(n_out,) + param_shape``; for
    ``target="slopes"`` the parameter shape is ``(1,)`` and non-PReLU layers
    give ``None``.
    """
    if net.num_parameters > MAX_FD_PARAMS:
        raise OracleError(f"network has {net.num_parameters} parameters (> {MAX_FD_PARAMS})")
    if target not in ("weights", "biases", "slopes"):
        raise OracleError(f"unknown target {target!r}")
    base = _unpack(net)
    h = spec.step
    n_out = net.output_dim
    out = []
    for ell, (w, b, kind, slope) in enumerate(base):
        if target == "slopes" and kind != "prelu":
            out.append(None)
            continue
        shape = {"weights": (len(w), len(w[0])), "biases": (len(b),), "slopes": (1,)}[target]
        jac = np.zeros((n_out,) + shape)
        for idx in np.ndindex(*shape):
            vals = []
            for sign in (1.0, -1.0):
                layers = [(list(map(list, lw)), list(lb), lk, ls) for lw, lb, lk, ls in base]
                lw, lb, lk, ls = layers[ell]
                if target == "weights":
                    lw[idx[0]][idx[1]] += sign * h
                elif target == "biases":
                    lb[idx[0]] += sign * h
                else:
                    layers[ell] = (lw, lb, lk, ls + sign * h)
                vals.append(np.array(naive_forward(layers, x)))
            jac[(slice(None),) + idx] = (vals[0] - vals[1]) / (2 * h)
        out.append(jac)
    return out


def fd_loss_gradient(net, inputs, targets, loss_fn, spec: FdSpec = FdSpec()) -> list:
    """Central differences of ``loss_fn(outputs, targets)`` w.r.t. ``net.parameters()``."""
    params = net.parameters()
    h = spec.step

    def total(ps):
        layers = _unpack(net.with_parameters(ps))
        outs = np.array([naive_forward(layers, x) for x in inputs])
        return loss_fn(outs, targets)

    grads = []
    for k, p in enumerate(params):
        g = np.zeros_like(p)
        for idx in np.ndindex(*p.shape):
            ps_plus = [q.copy() for q in params]
            ps_minus = [q.copy() for q in params]
            ps_plus[k][idx] += h
            ps_minus[k][idx] -= h
            g[idx] = (total(ps_plus) - total(ps_minus)) / (2 * h)
        grads.append(g)
    return grads


def brute_discrepancy(net, data, ell: int, i: int, j: int, delta_b: float) -> float:
    """``E_x ||y(x) - y_pruned(x)||^2`` by literal network surgery.

    The pruned copy has ``W[ell][i, j] = 0`` and ``b[ell][i] += delta_b``
    (``ell`` is 0-based).
    """
    layers = _unpack(net)
    pruned = [(list(map(list, w)), list(b), k, s) for w, b, k, s in layers]
    pruned[ell][0][i][j] = 0.0
    pruned[ell][1][i] += delta_b
    total = 0.0
    for x in data.inputs:
        y = naive_forward(layers, x)
        yp = naive_forward(pruned, x)
        total += sum((a - c) ** 2 for a, c in zip(y, yp))
    return total / len(data)


def literal_ec(dy_dw, dy_db, w):
    """Per-weight EC formula from explicit derivative samples.

    ``dy_dw`` and ``dy_db`` have shape ``(N, n_out)``: per-sample derivatives of
    every output w.r.t. the weight and its bias. Returns ``(importance, delta_b)``.
    """
    dy_dw = np.asarray(dy_dw)
    dy_db = np.asarray(dy_db)
    den = np.sum(np.mean(dy_db**2, axis=0))
    if den == 0:
        return 0.0, 0.0
    delta_b = w * np.sum(np.mean(dy_dw * dy_db, axis=0)) / den
    return linearized_objective(dy_dw, dy_db, w, delta_b), delta_b


def linearized_objective(dy_dw, dy_db, w, delta_b) -> float:
    """``sum_k E_x[(dy_k/dW * W - dy_k/db * delta_b)^2]``."""
    r = np.asarray(dy_dw) * w - np.asarray(dy_db) * delta_b
    return float(np.mean(np.sum(r * r, axis=1)))


def literal_ec_scores(net, data, spec: FdSpec = FdSpec()):
    """EC scores and compensations for every weight via finite-difference Jacobians."""
    per_sample_w = []
    per_sample_b = []
    for x in data.inputs:
        per_sample_w.append(fd_jacobian(net, x, "weights", spec))
        per_sample_b.append(fd_jacobian(net, x, "biases", spec))
    scores, comps = [], []
    for ell, layer in enumerate(net.layers):
        s = np.zeros(layer.shape)
        c = np.zeros(layer.shape)
        for i, j in np.ndindex(*layer.shape):
            dw = np.array([jw[ell][:, i, j] for jw in per_sample_w])
            db = np.array([jb[ell][:, i] for jb in per_sample_b])
            s[i, j], c[i, j] = literal_ec(dw, db, layer.weights[i, j])
        scores.append(s)
        comps.append(c)
    return scores, comps
