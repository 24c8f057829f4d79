"""Elimination-compensation pruning for fully-connected networks."""
from .data import Dataset, NoiseSpec, add_noise, load_mnist, load_tabular, split, synth_regression
from .network import (
    Activation,
    ActivationKind,
    ForwardTrace,
    Layer,
    Network,
    build_network,
    forward,
    loss_gradient,
    masked_forward,
    output_bias_jacobian,
)
from .pruning import (
    CompensationSet,
    MaskSet,
    PruneConfig,
    ScoreSet,
    Strategy,
    apply_prune,
    compute_scores,
    ec_scores,
    gradient_magnitude_scores,
    magnitude_scores,
    nonlinear_scores,
    pruning_ratio,
    random_scores,
    select_mask,
)
from .serialization import load_checkpoint, save_checkpoint
from .training import AdamState, LossKind, TrainConfig, adam_step, loss, train

__version__ = "0.1.0"

__all__ = [
    "Activation",
    "ActivationKind",
    "AdamState",
    "CompensationSet",
    "Dataset",
    "ForwardTrace",
    "Layer",
    "LossKind",
    "MaskSet",
    "Network",
    "NoiseSpec",
    "PruneConfig",
    "ScoreSet",
    "Strategy",
    "TrainConfig",
    "adam_step",
    "add_noise",
    "apply_prune",
    "build_network",
    "compute_scores",
    "ec_scores",
    "forward",
    "gradient_magnitude_scores",
    "load_checkpoint",
    "load_mnist",
    "load_tabular",
    "loss",
    "loss_gradient",
    "magnitude_scores",
    "masked_forward",
    "nonlinear_scores",
    "output_bias_jacobian",
    "pruning_ratio",
    "random_scores",
    "save_checkpoint",
    "select_mask",
    "split",
    "synth_regression",
    "train",
    "__version__",
]
