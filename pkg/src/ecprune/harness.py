"""Train-prune-fine-tune experiment matrix and its reports.

An experiment spec is a YAML file::

    name: pde-arch1
    dataset:
      kind: synthetic          # synthetic | mnist | tabular
      generator: diffusion_sorption
      n: 5000
      seed: 0
      train_fraction: 0.8
      split_seed: 0
    noise: {amplitude: 0.005, seed: 0}
    architecture: {sizes: [68, 32, 32, 32, 1], activation: prelu}
    strategies: [ec, nonlinear, magnitude, gradient_magnitude, random, fully_connected]
    ratios: [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
    seeds: [0, 1, 2, 3, 4]
    train: {epochs: 15, batch_size: 64, learning_rate: 0.001}
    finetune: {epochs: 15}
    compensate: true
    expectation_subset: null
    timing: true

MNIST datasets name ``train_images``/``train_labels`` and optionally
``test_images``/``test_labels`` (otherwise the training files are split),
plus an optional ``train_subset`` size. Tabular datasets name a ``path``.
Relative paths resolve against the spec file's directory.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .data import NoiseSpec, add_noise, load_mnist, load_tabular, split, synth_regression
from .network import build_network
from .pruning import PruneConfig, Strategy, apply_prune, compute_scores, select_mask
from .serialization import save_checkpoint
from .training import TrainConfig, loss, loss_for_task, train

log = logging.getLogger(__name__)

FULLY_CONNECTED = "fully_connected"
STRATEGY_ORDER = [s.value for s in Strategy] + [FULLY_CONNECTED]
DEFAULT_RATIOS = [round(0.1 * k, 1) for k in range(1, 10)]
CSV_COLUMNS = [
    "dataset",
    "noise",
    "arch",
    "strategy",
    "seed",
    "ratio",
    "baseline_loss",
    "loss_after_prune",
    "loss_after_finetune",
    "score_wall_ms",
]
FINETUNE_SEED_OFFSET = 10_000


class ExperimentError(ValueError):
    pass


def count_weights(arch) -> int:
    return sum(a * b for a, b in zip(arch[:-1], arch[1:]))


def _scaled(arch, s):
    return [arch[0]] + [max(1, round(s * n)) for n in arch[1:-1]] + [arch[-1]]


def shrink_architecture(arch, ratio: float) -> list[int]:
    """Uniformly narrow the hidden layers to at most ``round((1-r)|W|)`` weights.

    Every hidden width becomes ``max(1, round(s * n))`` for one scale ``s``;
    the candidate scales are the points where some width changes, so the
    returned architecture has the largest weight count under the budget.
    """
    arch = list(arch)
    if len(arch) < 3:
        raise ExperimentError("shrinking needs at least one hidden layer")
    if not 0 <= ratio < 1:
        raise ExperimentError("ratio must lie in [0, 1)")
    target = round((1 - ratio) * count_weights(arch))
    if count_weights(_scaled(arch, 0.0)) > target:
        raise ExperimentError(f"even width-1 hidden layers exceed {target} weights")
    breaks = sorted({(k + 0.5) / n for n in arch[1:-1] for k in range(n + 1)} | {1.0})
    candidates = set(breaks)
    candidates.update((a + b) / 2 for a, b in zip(breaks, breaks[1:]))
    best, best_count = _scaled(arch, 0.0), -1
    for s in sorted(candidates):
        if s > 1.0:
            break
        cand = _scaled(arch, s)
        c = count_weights(cand)
        if best_count < c <= target:
            best, best_count = cand, c
    return best


@dataclass
class ExperimentSpec:
    dataset: dict
    architecture: list
    activation: str = "prelu"
    strategies: list = field(default_factory=lambda: list(STRATEGY_ORDER))
    ratios: list = field(default_factory=lambda: list(DEFAULT_RATIOS))
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    train: TrainConfig = field(default_factory=TrainConfig)
    finetune: TrainConfig = field(default_factory=TrainConfig)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    compensate: bool = True
    expectation_subset: int | None = None
    timing: bool = True
    name: str = "experiment"
    checkpoint_dir: str | None = None
    base_dir: str = "."

    def __post_init__(self):
        if not self.seeds:
            raise ExperimentError("seeds must be nonempty")
        if any(not 0 <= r <= 1 for r in self.ratios):
            raise ExperimentError("ratios must lie in [0, 1]")
        unknown = set(self.strategies) - set(STRATEGY_ORDER)
        if unknown:
            raise ExperimentError(f"unknown strategies {sorted(unknown)}")

    @classmethod
    def from_dict(cls, d: dict, base_dir=".") -> "ExperimentSpec":
        d = dict(d)
        arch = d.pop("architecture")
        if isinstance(arch, dict):
            sizes, act = arch["sizes"], arch.get("activation", "prelu")
        else:
            sizes, act = arch, "prelu"
        train_kw = d.pop("train", {}) or {}
        ft_kw = {**train_kw, **(d.pop("finetune", {}) or {})}
        noise = d.pop("noise", None) or {}
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ExperimentError(f"unknown spec keys {sorted(extra)}")
        return cls(
            architecture=list(sizes),
            activation=act,
            train=TrainConfig(**train_kw),
            finetune=TrainConfig(**ft_kw),
            noise=NoiseSpec(**noise),
            base_dir=str(base_dir),
            **d,
        )

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        path = Path(path)
        with open(path) as f:
            return cls.from_dict(yaml.safe_load(f), base_dir=path.parent)


@dataclass
class ReportRow:
    dataset: str
    noise: float
    arch: str
    strategy: str
    seed: int
    ratio: float
    baseline_loss: float
    loss_after_prune: float
    loss_after_finetune: float
    score_wall_ms: float
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class ExperimentReport:
    rows: list = field(default_factory=list)

    def sorted(self) -> "ExperimentReport":
        order = {s: k for k, s in enumerate(STRATEGY_ORDER)}
        return ExperimentReport(sorted(self.rows, key=lambda r: (order[r.strategy], r.seed, r.ratio)))

    @property
    def ok(self) -> bool:
        return not any(r.failed for r in self.rows)

    def select(self, **kw) -> list:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in kw.items())]


def _resolve(spec: ExperimentSpec, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else Path(spec.base_dir) / p


def prepare_data(spec: ExperimentSpec):
    """Build ``(train, test)`` with noise applied once to both."""
    d = spec.dataset
    kind = d.get("kind", "synthetic")
    frac = d.get("train_fraction", 0.8)
    split_seed = d.get("split_seed", 0)
    if kind == "synthetic":
        full = synth_regression(d.get("generator", "diffusion_sorption"), d.get("n", 1000), d.get("seed", 0))
        train_data, test_data = split(full, frac, split_seed)
    elif kind == "tabular":
        train_data, test_data = split(load_tabular(_resolve(spec, d["path"])), frac, split_seed)
    elif kind == "mnist":
        full = load_mnist(_resolve(spec, d["train_images"]), _resolve(spec, d["train_labels"]))
        if "test_images" in d:
            train_data = full
            test_data = load_mnist(_resolve(spec, d["test_images"]), _resolve(spec, d["test_labels"]))
        else:
            train_data, test_data = split(full, frac, split_seed)
        if d.get("train_subset"):
            train_data = train_data.subset(np.arange(min(d["train_subset"], len(train_data))))
        if d.get("test_subset"):
            test_data = test_data.subset(np.arange(min(d["test_subset"], len(test_data))))
    else:
        raise ExperimentError(f"unknown dataset kind {kind!r}")
    if spec.noise.amplitude > 0:
        train_data = add_noise(train_data, spec.noise)
        test_data = add_noise(test_data, NoiseSpec(spec.noise.amplitude, spec.noise.seed + 1))
    return train_data, test_data


def _arch_str(sizes) -> str:
    return "-".join(str(n) for n in sizes)


def _with_seed(cfg: TrainConfig, seed: int) -> TrainConfig:
    return TrainConfig(**{**asdict(cfg), "seed": seed})


def _failed_row(spec, strategy, seed, ratio, baseline, exc) -> ReportRow:
    log.error("cell (%s, seed %s, r=%s) failed: %s", strategy, seed, ratio, exc)
    nan = float("nan")
    return ReportRow(
        spec.name, spec.noise.amplitude, _arch_str(spec.architecture), strategy, seed, ratio,
        baseline, nan, nan, nan, error=f"{type(exc).__name__}: {exc}",
    )


def run_seed(spec: ExperimentSpec, seed: int, data=None) -> list:
    """All cells of one seed: one training run shared by every mask strategy."""
    train_data, test_data = data if data is not None else prepare_data(spec)
    kind = loss_for_task(train_data)
    train_cfg = _with_seed(spec.train, seed)
    ft_cfg = _with_seed(spec.finetune, seed + FINETUNE_SEED_OFFSET)
    arch = _arch_str(spec.architecture)
    rows = []

    net0 = build_network(spec.architecture, spec.activation, seed)
    first = train(net0, None, train_data, train_cfg, kind)
    net = first.network
    baseline = loss(net, None, test_data, kind)
    if spec.checkpoint_dir:
        ckpt = _resolve(spec, spec.checkpoint_dir)
        ckpt.mkdir(parents=True, exist_ok=True)
        save_checkpoint(ckpt / f"{spec.name}-seed{seed}.npz", net)

    for strategy in spec.strategies:
        if strategy == FULLY_CONNECTED:
            for ratio in spec.ratios:
                try:
                    rows.append(_fully_connected_cell(spec, seed, ratio, baseline, train_data, test_data, kind))
                except Exception as exc:  # noqa: BLE001 - a failed cell must not stop the run
                    rows.append(_failed_row(spec, strategy, seed, ratio, baseline, exc))
            continue
        cfg = PruneConfig(strategy=strategy, seed=seed, expectation_subset=spec.expectation_subset)
        try:
            t0 = time.perf_counter()
            scores, comp = compute_scores(net, train_data, cfg, kind)
            wall_ms = (time.perf_counter() - t0) * 1e3 if spec.timing else 0.0
        except Exception as exc:  # noqa: BLE001
            rows.extend(_failed_row(spec, strategy, seed, r, baseline, exc) for r in spec.ratios)
            continue
        use_comp = comp if spec.compensate and cfg.strategy.compensates else None
        for ratio in spec.ratios:
            try:
                mask = select_mask(scores, ratio)
                pruned = apply_prune(net, mask, use_comp)
                after_prune = loss(pruned, None, test_data, kind)
                tuned = train(pruned, mask, train_data, ft_cfg, kind, state=first.state)
                after_ft = loss(tuned.network, None, test_data, kind)
                rows.append(
                    ReportRow(spec.name, spec.noise.amplitude, arch, strategy, seed, ratio,
                              baseline, after_prune, after_ft, wall_ms)
                )
            except Exception as exc:  # noqa: BLE001
                rows.append(_failed_row(spec, strategy, seed, ratio, baseline, exc))
    return rows


def _fully_connected_cell(spec, seed, ratio, baseline, train_data, test_data, kind) -> ReportRow:
    sizes = shrink_architecture(spec.architecture, ratio)
    net0 = build_network(sizes, spec.activation, seed)
    first = train(net0, None, train_data, _with_seed(spec.train, seed), kind)
    after_first = loss(first.network, None, test_data, kind)
    ft_cfg = _with_seed(spec.finetune, seed + FINETUNE_SEED_OFFSET)
    second = train(first.network, None, train_data, ft_cfg, kind, state=first.state)
    after_ft = loss(second.network, None, test_data, kind)
    return ReportRow(spec.name, spec.noise.amplitude, _arch_str(sizes), FULLY_CONNECTED, seed,
                     ratio, baseline, after_first, after_ft, 0.0)


def _run_seed_job(args):
    spec, seed = args
    return run_seed(spec, seed)


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> ExperimentReport:
    """Run every (strategy, seed, ratio) cell; rows come back in canonical order."""
    if jobs > 1 and len(spec.seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_seed_job, [(spec, s) for s in spec.seeds]))
    else:
        data = prepare_data(spec)
        chunks = [run_seed(spec, s, data) for s in spec.seeds]
    return ExperimentReport([row for chunk in chunks for row in chunk]).sorted()


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def write_report(report: ExperimentReport, path, fmt: str = "csv"):
    rows = report.sorted().rows
    if fmt == "csv":
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in rows:
                w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
    elif fmt == "json":
        payload = [
            {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in asdict(r).items()}
            for r in rows
        ]
        with open(path, "w") as f:
            json.dump({"columns": CSV_COLUMNS, "rows": payload}, f, indent=1)
            f.write("\n")
    else:
        raise ExperimentError(f"unknown report format {fmt!r}")


_FLOAT_COLS = {"noise", "ratio", "baseline_loss", "loss_after_prune", "loss_after_finetune", "score_wall_ms"}


def read_report(path, fmt: str = "csv") -> ExperimentReport:
    if fmt == "json":
        with open(path) as f:
            payload = json.load(f)
        rows = []
        for d in payload["rows"]:
            d = {k: (float("nan") if v is None and k in _FLOAT_COLS else v) for k, v in d.items()}
            rows.append(ReportRow(**d))
        return ExperimentReport(rows)
    rows = []
    with open(path, newline="") as f:
        for d in csv.DictReader(f):
            rows.append(
                ReportRow(
                    **{
                        k: float(v) if k in _FLOAT_COLS else int(v) if k == "seed" else v
                        for k, v in d.items()
                    }
                )
            )
    return ExperimentReport(rows)
