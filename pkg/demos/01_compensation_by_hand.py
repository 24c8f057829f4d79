"""Elimination-compensation on a network small enough to check by hand.

A single affine unit y = w x + b with w = 3, evaluated on x in {1, 2, 3}.
Dropping w and shifting b by w * E[x] = 6 leaves only the centred part of
the signal, so the expected squared output change is w^2 Var(x) = 6.
"""
import numpy as np

from ecprune import Dataset, Layer, MaskSet, Network, apply_prune, ec_scores, forward, nonlinear_scores

net = Network((Layer([[3.0]], [0.0]),))
data = Dataset([[1.0], [2.0], [3.0]], np.zeros((3, 1)))

scores, comp = ec_scores(net, data)
print("EC importance       :", scores[0][0, 0])
print("optimal bias shift  :", comp[0][0, 0])
print("brute-force (mean)  :", nonlinear_scores(net, data)[0][0][0, 0])

pruned = apply_prune(net, MaskSet([[[0]]]), comp)
print("outputs before      :", forward(net, data.inputs).output.ravel())
print("outputs after prune :", forward(pruned, data.inputs).output.ravel())

# %% A deeper net: the linearised score tracks the true discrepancy
from ecprune import build_network, synth_regression  # noqa: E402
from ecprune.verification import brute_discrepancy  # noqa: E402

net = build_network([3, 6, 4, 1], "tanh", seed=1)
data = synth_regression("sine", 200, seed=0)
data = Dataset(np.column_stack([data.inputs, data.inputs[:, :1] ** 2]), data.targets)
scores, comp = ec_scores(net, data)
for ell, i, j in [(0, 2, 1), (1, 3, 0), (2, 0, 3)]:
    exact = brute_discrepancy(net, data, ell, i, j, comp[ell][i, j])
    print(f"layer {ell} w[{i},{j}]: EC {scores[ell][i, j]:.4e}  surgery {exact:.4e}")
