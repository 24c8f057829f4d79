"""Losses, Adam, and masked train / fine-tune loops."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .network import Network, loss_gradient, masked_forward


class LossKind(str, enum.Enum):
    SOFTMAX_CROSS_ENTROPY = "softmax_cross_entropy"
    MEAN_SQUARED_ERROR = "mse"


class TrainingError(ValueError):
    pass


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _check_targets(outputs, targets, kind):
    targets = np.asarray(targets)
    if kind is LossKind.SOFTMAX_CROSS_ENTROPY:
        if targets.ndim != 1 or not np.issubdtype(targets.dtype, np.integer):
            raise TrainingError("cross-entropy needs integer class-index targets")
        if targets.min() < 0 or targets.max() >= outputs.shape[1]:
            raise TrainingError("class index out of range for network output")
    else:
        if not np.issubdtype(targets.dtype, np.floating):
            raise TrainingError("MSE needs real-valued targets")
        targets = targets.reshape(outputs.shape)
    return targets


def loss_value_and_output_grad(outputs, targets, kind):
    """Mean per-sample loss and its gradient w.r.t. the network outputs."""
    kind = LossKind(kind)
    n = outputs.shape[0]
    targets = _check_targets(outputs, targets, kind)
    if kind is LossKind.SOFTMAX_CROSS_ENTROPY:
        logp = _log_softmax(outputs)
        rows = np.arange(n)
        value = -logp[rows, targets].mean()
        grad = np.exp(logp)
        grad[rows, targets] -= 1.0
        return float(value), grad / n
    # per-sample loss is the mean over output components
    diff = outputs - targets
    value = np.mean(diff**2)
    return float(value), 2.0 * diff / diff.size


def loss(net: Network, mask, data, kind) -> float:
    """Mean per-sample loss of ``net`` (optionally masked) on ``data``."""
    kind = LossKind(kind)
    check_task(data, kind)
    out = masked_forward(net, mask, data.inputs).output
    value, _ = loss_value_and_output_grad(out, data.targets, kind)
    return value


def check_task(data, kind):
    if len(data) == 0:
        raise TrainingError("dataset is empty")
    wants = "classification" if kind is LossKind.SOFTMAX_CROSS_ENTROPY else "regression"
    if data.task != wants:
        raise TrainingError(f"loss {kind.value} is incompatible with a {data.task} dataset")


def loss_for_task(data) -> LossKind:
    if data.task == "classification":
        return LossKind.SOFTMAX_CROSS_ENTROPY
    return LossKind.MEAN_SQUARED_ERROR


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 15
    batch_size: int = 64
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon_adam: float = 1e-8
    seed: int = 0
    fit_biases: bool = True

    def __post_init__(self):
        if self.epochs < 0:
            raise TrainingError("epochs must be >= 0")
        if self.batch_size < 1:
            raise TrainingError("batch_size must be >= 1")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise TrainingError("Adam betas must lie in [0, 1)")


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(state: AdamState, params, grads, cfg: TrainConfig):
    """One bias-corrected Adam update. Returns ``(new_params, new_state)``."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise TrainingError("params, grads and optimizer state do not line up")
    t = state.step + 1
    b1, b2 = cfg.beta1, cfg.beta2
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise TrainingError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingError("non-finite gradient")
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        new_p.append(p - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon_adam))
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(new_m, new_v, t)


@dataclass
class TrainResult:
    network: Network
    history: list = field(default_factory=list)
    state: AdamState | None = None


def _weight_slots(net: Network) -> list[int]:
    """Indices of weight matrices within ``net.parameters()``."""
    slots, k = [], 0
    for layer in net.layers:
        slots.append(k)
        k += 3 if layer.activation.trainable else 2
    return slots


def train(net: Network, mask, data, cfg: TrainConfig, kind, state: AdamState | None = None):
    """Mini-batch Adam on ``data``; returns a :class:`TrainResult`.

    With a mask, pruned weights are zeroed up front, their gradients and Adam
    moments are forced to zero, and they are re-zeroed after every step.
    ``state`` continues an earlier optimizer run (e.g. across a prune event).
    ``history`` holds the mean batch loss of each epoch.
    """
    kind = LossKind(kind)
    check_task(data, kind)
    params = net.parameters()
    slots = _weight_slots(net)
    masks = None
    if mask is not None:
        masks = [np.asarray(m) != 0 for m in mask]
        for s, m in zip(slots, masks):
            params[s] = np.where(m, params[s], 0.0)
    state = AdamState.zeros_like(params) if state is None else _copy_state(state)
    if masks is not None:
        for s, m in zip(slots, masks):
            state.m[s] = np.where(m, state.m[s], 0.0)
            state.v[s] = np.where(m, state.v[s], 0.0)
    bias_slots = {s + 1 for s in slots}

    history = []
    n = len(data)
    current = net.with_parameters(params)
    for epoch in range(cfg.epochs):
        order = np.random.default_rng([cfg.seed, epoch]).permutation(n)
        batch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            value, grads = loss_gradient(current, masks, data.inputs[idx], data.targets[idx], kind)
            if not cfg.fit_biases:
                grads = [np.zeros_like(g) if k in bias_slots else g for k, g in enumerate(grads)]
            params, state = adam_step(state, params, grads, cfg)
            if masks is not None:
                for s, m in zip(slots, masks):
                    params[s] = np.where(m, params[s], 0.0)
            current = net.with_parameters(params)
            batch_losses.append(value)
        history.append(float(np.mean(batch_losses)))
    return TrainResult(current, history, state)


def _copy_state(state: AdamState) -> AdamState:
    return AdamState([m.copy() for m in state.m], [v.copy() for v in state.v], state.step)
