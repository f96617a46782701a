"""System-level dataset asynchrony scoring and the re-sync health gate.

For every (source, consumer) pair the score is the size-normalized mean
log-likelihood ratio of the source sample under the copy's density
versus its own density, both estimated by Gaussian KDE in sentence
embedding space. Per-class means and their sum give the system metric.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .density import kde_fit, kde_log_density_batch
from .embedding import EmbeddingTable, embed_sentences
from .errors import InvalidInputError, ParseError
from .registry import Dataset, DatasetCopy, Registry


class EmptyCopyPolicy(Enum):
    SKIP = "skip"
    ERROR = "error"


class HealthAction(Enum):
    HEALTHY = "healthy"
    RESYNC_RECOMMENDED = "resync_recommended"


@dataclass(frozen=True)
class AsynchronyReport:
    """All pair scores, per-class means, and the system totals.

    `alpha` is the signed sum of per-class means; `alpha_abs` sums their
    magnitudes and is the number consumed by health gating and the
    correlation analyses, since pair scores are typically negative under
    sub-sampling.
    """

    per_pair: dict[tuple[int, int], float]
    per_class: dict[int, float]
    alpha: float
    alpha_abs: float
    k: int
    skipped_pairs: tuple[tuple[int, int], ...]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "per_pair": [
                {"source": s, "consumer": c, "a": self.per_pair[(s, c)]}
                for s, c in sorted(self.per_pair)
            ],
            "per_class": [{"class": c, "a": self.per_class[c]} for c in sorted(self.per_class)],
            "alpha": self.alpha,
            "alpha_abs": self.alpha_abs,
            "skipped_pairs": [
                {"source": s, "consumer": c} for s, c in sorted(self.skipped_pairs)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AsynchronyReport":
        try:
            per_pair = {
                (int(r["source"]), int(r["consumer"])): float(r["a"]) for r in data["per_pair"]
            }
            per_class = {int(r["class"]): float(r["a"]) for r in data["per_class"]}
            skipped = tuple(
                (int(r["source"]), int(r["consumer"])) for r in data["skipped_pairs"]
            )
            return cls(
                per_pair=per_pair,
                per_class=per_class,
                alpha=float(data["alpha"]),
                alpha_abs=float(data["alpha_abs"]),
                k=int(data["k"]),
                skipped_pairs=skipped,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed asynchrony report: {exc}")

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "AsynchronyReport":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"report is not valid JSON: {exc}")
        return cls.from_dict(data)


@dataclass(frozen=True)
class HealthVerdict:
    """Outcome of comparing a current report against an accepted baseline.

    The compared quantity is each report's alpha_abs.
    """

    baseline_alpha: float
    current_alpha: float
    relative_degradation: float
    threshold: float
    action: HealthAction

    def to_dict(self) -> dict:
        return {
            "baseline_alpha": self.baseline_alpha,
            "current_alpha": self.current_alpha,
            "relative_degradation": self.relative_degradation,
            "threshold": self.threshold,
            "action": self.action.value,
        }


def pair_llr(
    original: Dataset,
    copy: DatasetCopy,
    table: EmbeddingTable,
    variance: float,
) -> float:
    """Mean log-likelihood ratio of the source sample: copy density vs own.

    Both densities use the same kernel variance; the mean runs over every
    utterance of the source's latest version. A copy identical to the
    source gives exactly 0.
    """
    source_utts = original.latest.utterances
    if len(source_utts) == 0:
        raise InvalidInputError(f"dataset {original.class_id} latest version is empty")
    if copy.is_empty:
        raise InvalidInputError(
            f"copy ({copy.source_class} -> {copy.consumer_class}) is empty"
        )
    source_emb = embed_sentences([u.tokens for u in source_utts], table)
    copy_emb = embed_sentences([u.tokens for u in copy.utterances], table)
    own_density = kde_fit(source_emb, variance)
    copy_density = kde_fit(copy_emb, variance)
    ratios = kde_log_density_batch(copy_density, source_emb) - kde_log_density_batch(
        own_density, source_emb
    )
    return float(np.mean(ratios))


def compute_alpha(
    registry: Registry,
    table: EmbeddingTable,
    variance: float,
    empty_copy_policy: EmptyCopyPolicy = EmptyCopyPolicy.SKIP,
    jobs: int = 1,
) -> AsynchronyReport:
    """Score every (source, consumer) pair and assemble the system report.

    Pair evaluations are independent; with jobs > 1 they run on a thread
    pool and the report is assembled by key, so the result does not
    depend on completion order.
    """
    if not registry.fully_materialized:
        missing = [p for p in registry.pairs() if p not in registry.copies]
        raise InvalidInputError(f"registry is missing copies for pairs {missing[:5]}")
    for dataset in registry.datasets:
        if len(dataset.latest.utterances) == 0:
            raise InvalidInputError(f"dataset {dataset.class_id} latest version is empty")

    skipped: list[tuple[int, int]] = []
    live_pairs: list[tuple[int, int]] = []
    for pair in registry.pairs():
        if registry.copies[pair].is_empty:
            if empty_copy_policy is EmptyCopyPolicy.ERROR:
                raise InvalidInputError(f"copy for pair {pair} is empty")
            skipped.append(pair)
        else:
            live_pairs.append(pair)

    def score(pair: tuple[int, int]) -> float:
        source, consumer = pair
        return pair_llr(registry.datasets[source], registry.copies[pair], table, variance)

    per_pair: dict[tuple[int, int], float] = {}
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for pair, value in zip(live_pairs, pool.map(score, live_pairs)):
                per_pair[pair] = value
    else:
        for pair in live_pairs:
            per_pair[pair] = score(pair)

    per_class: dict[int, float] = {}
    for source in range(registry.k):
        values = [per_pair[(source, c)] for c in range(registry.k) if (source, c) in per_pair]
        if not values:
            raise InvalidInputError(
                f"every copy of class {source} was skipped; its mean score is undefined"
            )
        per_class[source] = float(np.mean(values))
    alpha = float(sum(per_class.values()))
    alpha_abs = float(sum(abs(v) for v in per_class.values()))
    return AsynchronyReport(
        per_pair=per_pair,
        per_class=per_class,
        alpha=alpha,
        alpha_abs=alpha_abs,
        k=registry.k,
        skipped_pairs=tuple(skipped),
    )


def health_check(
    baseline: AsynchronyReport, current: AsynchronyReport, threshold: float
) -> HealthVerdict:
    """Recommend a dataset re-sync when alpha_abs degraded too far.

    relative_degradation = (current - baseline) / max(baseline, 1e-12),
    so a synchronized (zero) baseline still yields a defined verdict.
    """
    if threshold <= 0:
        raise InvalidInputError(f"threshold must be positive, got {threshold}")
    if baseline.k != current.k:
        raise InvalidInputError(
            f"reports disagree on class count: baseline {baseline.k}, current {current.k}"
        )
    degradation = (current.alpha_abs - baseline.alpha_abs) / max(baseline.alpha_abs, 1e-12)
    action = (
        HealthAction.RESYNC_RECOMMENDED if degradation > threshold else HealthAction.HEALTHY
    )
    return HealthVerdict(
        baseline_alpha=baseline.alpha_abs,
        current_alpha=current.alpha_abs,
        relative_degradation=degradation,
        threshold=threshold,
        action=action,
    )
