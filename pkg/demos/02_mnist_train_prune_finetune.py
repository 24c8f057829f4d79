"""Train, prune and fine-tune on MNIST with every strategy.

Point the paths below at the standard IDX files (gzip is fine). Without
them the script falls back to the 5000-image MNIST subset that ships with
mlxtend, written out as IDX files first.
"""
import os
import sys
import tempfile

import numpy as np

from ecprune.data import write_idx
from ecprune.harness import ExperimentSpec, run_experiment, write_report

MNIST_DIR = os.environ.get("MNIST_DIR")

if MNIST_DIR:
    files = dict(
        train_images=os.path.join(MNIST_DIR, "train-images-idx3-ubyte.gz"),
        train_labels=os.path.join(MNIST_DIR, "train-labels-idx1-ubyte.gz"),
        test_images=os.path.join(MNIST_DIR, "t10k-images-idx3-ubyte.gz"),
        test_labels=os.path.join(MNIST_DIR, "t10k-labels-idx1-ubyte.gz"),
    )
else:
    import mlxtend

    table = np.loadtxt(os.path.join(os.path.dirname(mlxtend.__file__), "data", "data", "mnist_5k.csv.gz"),
                       delimiter=",")
    table = table[np.random.default_rng(0).permutation(len(table))]
    images = table[:, :-1].astype(np.uint8).reshape(-1, 28, 28)
    labels = table[:, -1].astype(np.uint8)
    tmp = tempfile.mkdtemp()
    files = {k: os.path.join(tmp, k) for k in ("train_images", "train_labels", "test_images", "test_labels")}
    write_idx(images[:3500], labels[:3500], files["train_images"], files["train_labels"])
    write_idx(images[3500:], labels[3500:], files["test_images"], files["test_labels"])

spec = ExperimentSpec.from_dict(
    dict(
        name="mnist",
        dataset=dict(kind="mnist", **files),
        architecture=dict(sizes=[784, 32, 32, 10], activation="prelu"),
        strategies=["ec", "magnitude", "gradient_magnitude", "random", "fully_connected"],
        ratios=[0.3, 0.5, 0.7, 0.9],
        seeds=[0, 1],
        train=dict(epochs=5),
        finetune=dict(epochs=5),
        expectation_subset=2000,
    )
)
report = run_experiment(spec)

print(f"{'strategy':20s} {'r':>4s} {'baseline':>9s} {'pruned':>9s} {'fine-tuned':>10s}")
for row in report.rows:
    print(f"{row.strategy:20s} {row.ratio:4.1f} {row.baseline_loss:9.4f} "
          f"{row.loss_after_prune:9.4f} {row.loss_after_finetune:10.4f}")

if len(sys.argv) > 1:
    write_report(report, sys.argv[1])
