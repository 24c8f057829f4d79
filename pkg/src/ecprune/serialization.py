"""Checkpoint container: a NumPy ``.npz`` archive with a JSON header.

Archive members (format version 1):

``header``
    UTF-8 JSON bytes stored as a uint8 array::

        {"format": "ecprune-checkpoint", "version": 1,
         "sizes": [n_in, n_1, ..., n_L],
         "activations": [{"kind": "prelu", "slope": 0.25}, ...],
         "extras": ["mask", "scores", ...]}

``W{l}``, ``b{l}``
    float64 weights ``(n_l, n_{l-1})`` (row-major) and biases ``(n_l,)``,
    ``l = 0 .. L-1``.
``{extra}{l}``
    optional per-layer arrays aligned with ``W{l}``, e.g. ``mask0`` (int8)
    or ``scores0``/``compensation0`` (float64).

``.npz`` stores raw IEEE-754 bytes, so a round trip is exact.
"""
from __future__ import annotations

import json

import numpy as np

from .network import Activation, Layer, Network

FORMAT = "ecprune-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, net: Network, **extras):
    """Write ``net`` plus optional named per-layer arrays (MaskSet, ScoreSet, ...)."""
    header = {
        "format": FORMAT,
        "version": VERSION,
        "sizes": net.sizes,
        "activations": [
            {"kind": layer.activation.kind.value, "slope": layer.activation.slope}
            for layer in net.layers
        ],
        "extras": sorted(extras),
    }
    arrays = {"header": np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)}
    for ell, layer in enumerate(net.layers):
        arrays[f"W{ell}"] = layer.weights
        arrays[f"b{ell}"] = layer.bias
    for name, value in extras.items():
        layers = list(value)
        if len(layers) != len(net.layers):
            raise CheckpointError(f"extra {name!r} has {len(layers)} layers")
        for ell, a in enumerate(layers):
            arrays[f"{name}{ell}"] = np.asarray(a)
    with open(path, "wb") as f:
        np.savez(f, **arrays)


def load_checkpoint(path):
    """Return ``(network, extras)`` where extras maps names to per-layer array lists."""
    with np.load(path, allow_pickle=False) as archive:
        if "header" not in archive:
            raise CheckpointError(f"{path}: missing header")
        header = json.loads(archive["header"].tobytes().decode())
        if header.get("format") != FORMAT:
            raise CheckpointError(f"{path}: not an {FORMAT} file")
        if header.get("version") != VERSION:
            raise CheckpointError(f"{path}: unsupported version {header.get('version')}")
        layers = []
        for ell, act in enumerate(header["activations"]):
            layers.append(
                Layer(archive[f"W{ell}"], archive[f"b{ell}"], Activation(act["kind"], act["slope"]))
            )
        net = Network(tuple(layers))
        if net.sizes != header["sizes"]:
            raise CheckpointError(f"{path}: stored sizes do not match the arrays")
        extras = {
            name: [archive[f"{name}{ell}"] for ell in range(len(layers))]
            for name in header["extras"]
        }
    return net, extras
