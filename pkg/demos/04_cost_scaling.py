"""Scoring cost: EC needs one backward sweep per output and sample, the
brute-force score one forward pass per weight. Widening the hidden layers
makes the gap grow with |W|.
"""
import time

from ecprune import build_network, ec_scores, nonlinear_scores, synth_regression

data = synth_regression(n=500, seed=0)
for width in (8, 16, 32, 64):
    net = build_network([68, width, width, 1], seed=0)
    t0 = time.perf_counter()
    ec_scores(net, data)
    t_ec = time.perf_counter() - t0
    t0 = time.perf_counter()
    nonlinear_scores(net, data)
    t_nl = time.perf_counter() - t0
    print(f"|W| = {net.num_weights:6d}   ec {t_ec * 1e3:7.2f} ms   brute force {t_nl:7.3f} s   "
          f"ratio {t_ec / t_nl:.2e}")
