"""Datasets: MNIST IDX files, tabular CSV, synthetic regression, noise, splits.

IDX layout (big-endian)::

    images: u32 magic 2051, u32 count, u32 rows, u32 cols, count*rows*cols u8
    labels: u32 magic 2049, u32 count, count u8

Files may be gzip-compressed. Tabular CSV layout: one header row, input
columns named ``in_*`` followed by target columns named ``out_*``, then one
numeric row per sample.
"""
from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass, replace

import numpy as np

IMAGES_MAGIC = 2051
LABELS_MAGIC = 2049


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    task: str = "regression"
    num_classes: int | None = None
    name: str = ""

    def __post_init__(self):
        x = np.array(self.inputs, dtype=np.float64, ndmin=2)
        if self.task == "classification":
            y = np.asarray(self.targets).astype(np.int64).reshape(-1)
            if self.num_classes is None:
                raise DataError("classification datasets need num_classes")
            if y.size and (y.min() < 0 or y.max() >= self.num_classes):
                raise DataError(f"class labels must lie in [0, {self.num_classes})")
        elif self.task == "regression":
            y = np.array(self.targets, dtype=np.float64)
            y = y.reshape(len(y), -1) if y.ndim < 2 else y
        else:
            raise DataError(f"unknown task {self.task!r}")
        if x.shape[0] < 1:
            raise DataError("dataset needs at least one sample")
        if y.shape[0] != x.shape[0]:
            raise DataError(f"{x.shape[0]} inputs but {y.shape[0]} targets")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DataError("dataset values must be finite")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def output_dim(self) -> int:
        if self.task == "classification":
            return self.num_classes
        return self.targets.shape[1]

    def subset(self, idx) -> "Dataset":
        return replace(self, inputs=self.inputs[idx], targets=self.targets[idx])


def _read_bytes(path) -> bytes:
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _idx_header(raw: bytes, path, magic: int, ndims: int):
    need = 4 * (ndims + 1)
    if len(raw) < need:
        raise DataError(f"{path}: truncated header at byte offset {len(raw)} (need {need} bytes)")
    fields = struct.unpack(">" + "I" * (ndims + 1), raw[:need])
    if fields[0] != magic:
        raise DataError(f"{path}: bad magic number {fields[0]} at byte offset 0 (expected {magic})")
    return fields[1:], need


def load_mnist(images_path, labels_path) -> Dataset:
    """Read an IDX image/label pair; pixels are scaled to [0, 1]."""
    raw_img = _read_bytes(images_path)
    (count, rows, cols), off = _idx_header(raw_img, images_path, IMAGES_MAGIC, 3)
    size = count * rows * cols
    if len(raw_img) < off + size:
        raise DataError(
            f"{images_path}: truncated pixel data at byte offset {len(raw_img)} "
            f"(expected {off + size} bytes)"
        )
    raw_lbl = _read_bytes(labels_path)
    (n_labels,), loff = _idx_header(raw_lbl, labels_path, LABELS_MAGIC, 1)
    if n_labels != count:
        raise DataError(f"{labels_path}: label count {n_labels} at byte offset 4 != image count {count}")
    if len(raw_lbl) < loff + n_labels:
        raise DataError(
            f"{labels_path}: truncated labels at byte offset {len(raw_lbl)} "
            f"(expected {loff + n_labels} bytes)"
        )
    pixels = np.frombuffer(raw_img, dtype=np.uint8, count=size, offset=off)
    labels = np.frombuffer(raw_lbl, dtype=np.uint8, count=n_labels, offset=loff)
    if labels.size and labels.max() > 9:
        bad = int(np.argmax(labels > 9))
        raise DataError(f"{labels_path}: label {labels[bad]} > 9 at byte offset {loff + bad}")
    return Dataset(
        pixels.reshape(count, rows * cols) / 255.0,
        labels.astype(np.int64),
        task="classification",
        num_classes=10,
        name="mnist",
    )


def write_idx(images, labels, images_path, labels_path):
    """Write uint8 images ``(N, rows, cols)`` and labels ``(N,)`` as IDX files."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IMAGES_MAGIC, n, rows, cols))
        f.write(images.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", LABELS_MAGIC, len(labels)))
        f.write(labels.tobytes())


def load_tabular(path, name: str | None = None) -> Dataset:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        n_in = sum(h.startswith("in_") for h in header)
        n_out = sum(h.startswith("out_") for h in header)
        if n_in == 0 or n_out == 0 or n_in + n_out != len(header):
            raise DataError(f"{path}: header must be in_* columns followed by out_* columns")
        if any(not h.startswith("in_") for h in header[:n_in]):
            raise DataError(f"{path}: all in_* columns must precede the out_* columns")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise DataError(f"{path}: non-numeric cell in row {lineno}") from None
    if not rows:
        raise DataError(f"{path}: no samples")
    table = np.array(rows)
    return Dataset(table[:, :n_in], table[:, n_in:], task="regression", name=name or str(path))


def write_tabular(data: Dataset, path):
    header = [f"in_{k}" for k in range(data.input_dim)] + [f"out_{k}" for k in range(data.output_dim)]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for x, y in zip(data.inputs, data.targets):
            w.writerow([repr(float(v)) for v in np.concatenate([x, y])])


GRID_POINTS = 65
NUM_TIME_STEPS = 10
_MODES = 4


def synth_regression(kind: str = "diffusion_sorption", n: int = 1000, seed: int = 0) -> Dataset:
    """Deterministic synthetic regression data.

    ``diffusion_sorption``: inputs ``(mu, t, x, u0 on 65 grid points)``, 68 in
    total; the target is a Neumann heat-equation solution
    ``u = c0 + sum_m c_m exp(-mu (m pi)^2 t) cos(m pi x)`` with
    ``c0 = 0.5`` and ``sum |c_m| <= 0.5``, so ``u`` stays in [0, 1].
    ``sine``: 2 inputs, target ``sin(pi x0) cos(pi x1)``.
    """
    if n < 1:
        raise DataError("n must be >= 1")
    rng = np.random.default_rng(seed)
    if kind == "sine":
        x = rng.uniform(-1, 1, size=(n, 2))
        y = np.sin(np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1])
        return Dataset(x, y[:, None], name="synth-sine")
    if kind != "diffusion_sorption":
        raise DataError(f"unknown synthetic kind {kind!r}")

    modes = np.arange(1, _MODES + 1)
    raw = rng.uniform(-1, 1, size=(n, _MODES)) / modes
    coeff = 0.5 * raw / np.abs(raw).sum(axis=1, keepdims=True) * rng.uniform(0.3, 1.0, size=(n, 1))
    mu = rng.uniform(0.01, 0.1, size=n)
    t = rng.integers(0, NUM_TIME_STEPS, size=n) / (NUM_TIME_STEPS - 1)
    x = rng.integers(0, GRID_POINTS - 1, size=n) / (GRID_POINTS - 1)

    grid = np.linspace(0.0, 1.0, GRID_POINTS)
    u0 = 0.5 + coeff @ np.cos(np.pi * modes[:, None] * grid[None, :])
    decay = np.exp(-mu[:, None] * (np.pi * modes[None, :]) ** 2 * t[:, None])
    u = 0.5 + np.sum(coeff * decay * np.cos(np.pi * modes[None, :] * x[:, None]), axis=1)
    inputs = np.column_stack([mu, t, x, u0])
    return Dataset(inputs, u[:, None], name="synth-diffusion-sorption")


@dataclass(frozen=True)
class NoiseSpec:
    amplitude: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise DataError("noise amplitude must be >= 0")


def add_noise(data: Dataset, spec: NoiseSpec) -> Dataset:
    """Add i.i.d. U(-a, a) noise to the targets. Applying it twice adds noise twice."""
    if data.task != "regression":
        raise DataError("noise can only be added to regression targets")
    if spec.amplitude == 0:
        return data
    rng = np.random.default_rng(spec.seed)
    d = rng.uniform(-spec.amplitude, spec.amplitude, size=data.targets.shape)
    return replace(data, targets=data.targets + d)


def split(data: Dataset, train_fraction: float, seed: int = 0, allow_empty_test: bool = False):
    """Seeded shuffle into ``floor(f N)`` training and the remaining test samples.

    With ``f = 1`` the test part is ``None``, which must be requested via
    ``allow_empty_test``.
    """
    if not 0 <= train_fraction <= 1:
        raise DataError("train_fraction must lie in [0, 1]")
    n = len(data)
    n_train = int(np.floor(train_fraction * n))
    if n_train == 0:
        raise DataError("training split would be empty")
    if n_train == n and not allow_empty_test:
        raise DataError("test split would be empty; pass allow_empty_test=True")
    perm = np.random.default_rng(seed).permutation(n)
    train = data.subset(perm[:n_train])
    test = data.subset(perm[n_train:]) if n_train < n else None
    return train, test
