"""Simulation sweeps: how asynchrony, data size, class count and staleness
drive the accuracy gap between an OVA system and a synchronized
multi-class baseline.

Each sweep point generates a synthetic corpus, splits it, materializes
the copies that inject the asynchrony under study, trains both systems,
evaluates them on the shared test split, and scores the registry. Rows
are aggregated into seed means, and the correlation between the metric
magnitude and the error gap summarizes the sweep.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .asynchrony import EmptyCopyPolicy, compute_alpha
from .embedding import EmbeddingTable, embed_sentences
from .errors import InvalidInputError
from .models import (
    TrainConfig,
    evaluate,
    predict_multiclass,
    predict_ova,
    train_multiclass,
    train_ova,
)
from .registry import (
    Dataset,
    Registry,
    generate_evolving_corpus,
    generate_synthetic_corpus,
    materialize_copy,
    merge_classes,
    split_speaker_independent,
    split_timeline,
)
from .seeding import mix_seed


class SweepKind(Enum):
    ASYNC_FRACTION = "async"
    DATA_SIZE = "size"
    CLASS_COUNT = "classes"
    STALENESS = "staleness"


@dataclass
class BaseConfig:
    """Shared configuration under a sweep; the sweep grid overrides one knob.

    The defaults put the synthetic corpus in a regime where classes are
    separable yet each class cloud has discrete modes (short sentences,
    compact vocabularies), so sub-sampled or stale copies lose whole
    modes and the OVA/multi-class gap widens measurably with asynchrony.
    """

    k: int = 5
    per_class: int = 500
    vocab_per_class: int = 40
    shared_vocab_size: int = 40
    overlap: float = 0.2
    sentence_length: tuple[int, int] = (1, 3)
    dimension: int = 64
    variance: float = 0.01
    fraction: float = 0.3  # fixed sampling fraction for size/class/staleness sweeps
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    embed_seed: int = 0
    hyper: TrainConfig = field(default_factory=TrainConfig)
    # staleness sweeps only
    months: int = 8
    growth: float = 0.10
    vocab_shift: float = 0.05
    launch_months: dict[int, int] = field(default_factory=dict)

    def table(self) -> EmbeddingTable:
        return EmbeddingTable.hashed(self.dimension, self.embed_seed)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "per_class": self.per_class,
            "vocab_per_class": self.vocab_per_class,
            "shared_vocab_size": self.shared_vocab_size,
            "overlap": self.overlap,
            "sentence_length": list(self.sentence_length),
            "dimension": self.dimension,
            "variance": self.variance,
            "fraction": self.fraction,
            "ratios": list(self.ratios),
            "seeds": list(self.seeds),
            "embed_seed": self.embed_seed,
            "hyper": self.hyper.to_dict(),
            "months": self.months,
            "growth": self.growth,
            "vocab_shift": self.vocab_shift,
            "launch_months": {str(c): m for c, m in sorted(self.launch_months.items())},
        }


@dataclass
class SweepConfig:
    kind: SweepKind
    grid: list[float | int]
    base: BaseConfig = field(default_factory=BaseConfig)

    def __post_init__(self):
        if not self.grid:
            raise InvalidInputError("sweep grid is empty")
        diffs = [b - a for a, b in zip(self.grid, self.grid[1:])]
        if diffs and not (all(d > 0 for d in diffs) or all(d < 0 for d in diffs)):
            raise InvalidInputError(f"sweep grid must be strictly monotone, got {self.grid}")
        if not self.base.seeds:
            raise InvalidInputError("need at least one seed")

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "grid": list(self.grid), "base": self.base.to_dict()}


@dataclass(frozen=True)
class SweepRow:
    sweep_value: float | int
    seed: int
    ova_error: float
    mc_error: float
    gap: float
    rel_gap: float | None  # undefined when mc_error is 0
    alpha: float
    alpha_abs: float
    n_skipped_pairs: int

    def to_dict(self) -> dict:
        return {
            "sweep_value": self.sweep_value,
            "seed": self.seed,
            "ova_error": self.ova_error,
            "mc_error": self.mc_error,
            "gap": self.gap,
            "rel_gap": self.rel_gap,
            "alpha": self.alpha,
            "alpha_abs": self.alpha_abs,
            "n_skipped_pairs": self.n_skipped_pairs,
        }


@dataclass(frozen=True)
class PointFailure:
    sweep_value: float | int
    seed: int
    error: str

    def to_dict(self) -> dict:
        return {"sweep_value": self.sweep_value, "seed": self.seed, "error": self.error}


@dataclass
class SweepResult:
    config: SweepConfig
    rows: list[SweepRow]
    seed_means: list[dict]
    correlation_abs: float | None
    failures: list[PointFailure] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "rows": [r.to_dict() for r in self.rows],
            "seed_means": self.seed_means,
            "correlation_abs": self.correlation_abs,
            "failures": [f.to_dict() for f in self.failures],
        }


def pearson(xs: list[float], ys: list[float]) -> float | None:
    """Product-moment correlation; None when either series has no variance."""
    if len(xs) != len(ys):
        raise InvalidInputError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise InvalidInputError("need at least 2 observations")
    mx = sum(xs) / len(xs)
    my = sum(ys) / len(ys)
    cov = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    vx = sum((x - mx) ** 2 for x in xs)
    vy = sum((y - my) ** 2 for y in ys)
    if vx == 0 or vy == 0:
        return None
    r = cov / math.sqrt(vx * vy)
    return max(-1.0, min(1.0, r))


# ---------------------------------------------------------------------------
# Sweep point execution


def _pooled_dev(dev_datasets: list[Dataset], table: EmbeddingTable):
    X = np.vstack(
        [embed_sentences([u.tokens for u in d.latest.utterances], table) for d in dev_datasets]
    )
    y = np.concatenate(
        [np.full(len(d.latest.utterances), d.class_id, dtype=np.int64) for d in dev_datasets]
    )
    return X, y


def _evaluate_point(
    registry: Registry,
    train_datasets: list[Dataset],
    dev_datasets: list[Dataset],
    test_datasets: list[Dataset],
    value: float | int,
    seed: int,
    base: BaseConfig,
) -> SweepRow:
    table = base.table()
    report = compute_alpha(registry, table, base.variance, EmptyCopyPolicy.SKIP)
    ova = train_ova(registry, table, base.hyper, seed=seed, dev_datasets=dev_datasets)
    mc = train_multiclass(
        train_datasets, table, base.hyper, seed=seed, dev=_pooled_dev(dev_datasets, table)
    )
    test_utts = [u for d in test_datasets for u in d.latest.utterances]
    ova_err = evaluate(lambda t: predict_ova(ova, t, table), test_utts).error_rate
    mc_err = evaluate(lambda t: predict_multiclass(mc, t, table), test_utts).error_rate
    gap = ova_err - mc_err
    return SweepRow(
        sweep_value=value,
        seed=seed,
        ova_error=ova_err,
        mc_error=mc_err,
        gap=gap,
        rel_gap=gap / mc_err if mc_err > 0 else None,
        alpha=report.alpha,
        alpha_abs=report.alpha_abs,
        n_skipped_pairs=len(report.skipped_pairs),
    )


def _run_point(kind: SweepKind, value: float | int, seed: int, base: BaseConfig) -> SweepRow:
    if kind is SweepKind.STALENESS:
        datasets = generate_evolving_corpus(
            base.k,
            base.per_class,
            base.vocab_per_class,
            base.overlap,
            base.sentence_length,
            months=base.months,
            seed=seed,
            growth=base.growth,
            vocab_shift=base.vocab_shift,
            launch_months=base.launch_months,
            shared_vocab_size=base.shared_vocab_size,
        )
        train, dev, test = split_timeline(datasets, base.ratios, seed)
        registry = Registry(datasets=train)
        copies_seed = mix_seed(seed, "copies")
        if base.launch_months:
            # Mixed consumer fleet: odd-id consumers hold snapshots that are
            # `value` months old, even-id consumers are current. A class that
            # launched inside that window is then absent from the stale
            # consumers' negatives (skipped pairs) while every class keeps at
            # least one scoreable copy, so a_k stays defined for all k.
            now = base.months
            for source, consumer in registry.pairs():
                registry.copies[(source, consumer)] = materialize_copy(
                    registry.datasets[source],
                    consumer_class=consumer,
                    fraction=1.0,
                    staleness=int(value) if consumer % 2 == 1 else 0,
                    now=now,
                    seed=mix_seed(copies_seed, source, consumer),
                )
        else:
            registry.materialize(
                fraction=1.0, staleness=int(value), now=base.months, seed=copies_seed
            )
        return _evaluate_point(registry, train, dev, test, value, seed, base)

    if kind is SweepKind.CLASS_COUNT:
        if int(value) > base.k:
            raise InvalidInputError(
                f"class-count grid value {value} exceeds the base corpus's {base.k} classes"
            )
        datasets = generate_synthetic_corpus(
            base.k,
            base.per_class,
            base.vocab_per_class,
            base.overlap,
            base.sentence_length,
            seed=seed,
            shared_vocab_size=base.shared_vocab_size,
        )
        datasets = merge_classes(datasets, int(value), mix_seed(seed, "merge"))
        fraction = base.fraction
    else:
        per_class = int(value) if kind is SweepKind.DATA_SIZE else base.per_class
        fraction = float(value) if kind is SweepKind.ASYNC_FRACTION else base.fraction
        datasets = generate_synthetic_corpus(
            base.k,
            per_class,
            base.vocab_per_class,
            base.overlap,
            base.sentence_length,
            seed=seed,
            shared_vocab_size=base.shared_vocab_size,
        )
    train, dev, test = split_speaker_independent(datasets, base.ratios, seed)
    registry = Registry(datasets=train)
    registry.materialize(fraction=fraction, seed=mix_seed(seed, "copies"))
    return _evaluate_point(registry, train, dev, test, value, seed, base)


def _seed_means(rows: list[SweepRow], grid: list[float | int]) -> list[dict]:
    means = []
    for value in grid:
        group = [r for r in rows if r.sweep_value == value]
        if not group:
            continue
        rels = [r.rel_gap for r in group if r.rel_gap is not None]
        means.append(
            {
                "sweep_value": value,
                "n_seeds": len(group),
                "ova_error": float(np.mean([r.ova_error for r in group])),
                "mc_error": float(np.mean([r.mc_error for r in group])),
                "gap": float(np.mean([r.gap for r in group])),
                "rel_gap": float(np.mean(rels)) if rels else None,
                "alpha": float(np.mean([r.alpha for r in group])),
                "alpha_abs": float(np.mean([r.alpha_abs for r in group])),
                "n_skipped_pairs": float(np.mean([r.n_skipped_pairs for r in group])),
            }
        )
    return means


def run_sweep(config: SweepConfig, jobs: int = 1) -> SweepResult:
    """Run every (grid value, seed) point; failures are flagged, not silent."""
    points = [(value, seed) for value in config.grid for seed in config.base.seeds]

    def run_one(point):
        value, seed = point
        try:
            return _run_point(config.kind, value, seed, config.base)
        except Exception as exc:
            return PointFailure(sweep_value=value, seed=seed, error=f"{type(exc).__name__}: {exc}")

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run_one, points))
    else:
        outcomes = [run_one(p) for p in points]

    rows = [o for o in outcomes if isinstance(o, SweepRow)]
    failures = [o for o in outcomes if isinstance(o, PointFailure)]
    means = _seed_means(rows, config.grid)
    correlation = None
    if len(means) >= 2:
        correlation = pearson([m["alpha_abs"] for m in means], [m["gap"] for m in means])
    return SweepResult(
        config=config, rows=rows, seed_means=means, correlation_abs=correlation, failures=failures
    )


def run_async_sweep(config: SweepConfig, jobs: int = 1) -> SweepResult:
    if config.kind is not SweepKind.ASYNC_FRACTION:
        raise InvalidInputError(f"expected an async-fraction sweep, got {config.kind.value}")
    if any(not 0 < v <= 1 for v in config.grid):
        raise InvalidInputError(f"fractions must lie in (0, 1], got {config.grid}")
    return run_sweep(config, jobs=jobs)


def run_size_sweep(config: SweepConfig, jobs: int = 1) -> SweepResult:
    if config.kind is not SweepKind.DATA_SIZE:
        raise InvalidInputError(f"expected a data-size sweep, got {config.kind.value}")
    if any(int(v) < 3 for v in config.grid):
        raise InvalidInputError(f"per-class sizes must be >= 3, got {config.grid}")
    return run_sweep(config, jobs=jobs)


def run_class_sweep(config: SweepConfig, jobs: int = 1) -> SweepResult:
    if config.kind is not SweepKind.CLASS_COUNT:
        raise InvalidInputError(f"expected a class-count sweep, got {config.kind.value}")
    if any(int(v) > config.base.k or int(v) < 2 for v in config.grid):
        raise InvalidInputError(
            f"class counts must lie in [2, {config.base.k}], got {config.grid}"
        )
    return run_sweep(config, jobs=jobs)


def run_staleness_sweep(config: SweepConfig, jobs: int = 1) -> SweepResult:
    if config.kind is not SweepKind.STALENESS:
        raise InvalidInputError(f"expected a staleness sweep, got {config.kind.value}")
    if any(int(v) < 0 for v in config.grid):
        raise InvalidInputError(f"staleness months must be >= 0, got {config.grid}")
    return run_sweep(config, jobs=jobs)


RUNNERS = {
    SweepKind.ASYNC_FRACTION: run_async_sweep,
    SweepKind.DATA_SIZE: run_size_sweep,
    SweepKind.CLASS_COUNT: run_class_sweep,
    SweepKind.STALENESS: run_staleness_sweep,
}


# ---------------------------------------------------------------------------
# Output files


def _format_number(value) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


_CSV_COLUMNS = [
    "sweep_value",
    "seed",
    "ova_error",
    "mc_error",
    "gap",
    "rel_gap",
    "alpha",
    "alpha_abs",
    "n_skipped_pairs",
]


def write_sweep_csv(result: SweepResult, path: str | Path, digest: str) -> None:
    """All rows plus one seed-mean row per sweep value (seed column 'mean')."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config_digest={digest}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CSV_COLUMNS)
        for row in result.rows:
            record = row.to_dict()
            writer.writerow(
                [_format_number(record[c]) if c != "seed" else record[c] for c in _CSV_COLUMNS]
            )
        for mean in result.seed_means:
            writer.writerow(
                ["mean" if c == "seed" else _format_number(mean[c]) for c in _CSV_COLUMNS]
            )


def write_plot_series(result: SweepResult, out_dir: str | Path, digest: str) -> list[Path]:
    """Two-column data files (sweep value vs seed mean), one per series."""
    out = Path(out_dir)
    series = {"gap": "gap", "alpha_abs": "alpha_abs"}
    if result.config.kind is SweepKind.STALENESS:
        series["rel_gap"] = "rel_gap"
    paths = []
    for name, key in series.items():
        path = out / f"{name}.dat"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# config_digest={digest}\n")
            fh.write(f"# sweep_value {name} (seed means)\n")
            for mean in result.seed_means:
                if mean[key] is None:
                    continue
                fh.write(f"{_format_number(mean['sweep_value'])} {_format_number(mean[key])}\n")
        paths.append(path)
    return paths
