"""Pruning a regression surrogate of a diffusion problem under target noise.

Inputs are (mu, t, x, u0 on a 65-point grid); the target u(t, x) lies in
[0, 1]. Uniform noise of amplitude a is added to the targets, and the
test loss after pruning to r = 0.7 is compared across strategies.
"""
import numpy as np

from ecprune.harness import ExperimentSpec, run_experiment

for amplitude in (0.0, 0.005, 0.01):
    spec = ExperimentSpec.from_dict(
        dict(
            name="synth-ds",
            dataset=dict(kind="synthetic", generator="diffusion_sorption", n=3000, seed=0),
            noise=dict(amplitude=amplitude, seed=0),
            architecture=dict(sizes=[68, 32, 32, 32, 1]),
            strategies=["ec", "nonlinear", "magnitude", "gradient_magnitude", "random"],
            ratios=[0.7],
            seeds=[0, 1],
            train=dict(epochs=10),
            finetune=dict(epochs=5),
            expectation_subset=500,
        )
    )
    report = run_experiment(spec)
    print(f"noise a = {amplitude}")
    for strategy in ("ec", "nonlinear", "magnitude", "gradient_magnitude", "random"):
        rows = report.select(strategy=strategy)
        prune = np.mean([r.loss_after_prune for r in rows])
        tuned = np.mean([r.loss_after_finetune for r in rows])
        ms = np.mean([r.score_wall_ms for r in rows])
        print(f"  {strategy:20s} pruned {prune:10.3e}  fine-tuned {tuned:10.3e}  scoring {ms:8.1f} ms")
