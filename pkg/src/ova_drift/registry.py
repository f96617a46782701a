"""Datasets, their version timelines, and per-consumer snapshots.

Each class owns one dataset with an append-only history of versions
(timestamped in integer months). Other classifiers never read a live
dataset directly; they read a DatasetCopy, which may be sub-sampled,
stale, or both. The Registry holds all datasets plus the full map of
copies, and synthetic corpus generation lives here too.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, ParseError
from .seeding import mix_seed


@dataclass(frozen=True)
class Utterance:
    tokens: tuple[str, ...]
    class_label: int

    def __post_init__(self):
        if len(self.tokens) == 0:
            raise InvalidInputError("utterance must have at least one token")


@dataclass(frozen=True)
class DatasetVersion:
    timestamp: int  # months
    utterances: tuple[Utterance, ...]


@dataclass(frozen=True)
class Dataset:
    """One class's labeled collection, ordered by strictly increasing timestamp."""

    class_id: int
    versions: tuple[DatasetVersion, ...]

    def __post_init__(self):
        if len(self.versions) == 0:
            raise InvalidInputError(f"dataset {self.class_id} has no versions")
        timestamps = [v.timestamp for v in self.versions]
        if any(b <= a for a, b in zip(timestamps, timestamps[1:])):
            raise InvalidInputError(
                f"dataset {self.class_id} version timestamps not strictly increasing: {timestamps}"
            )
        for version in self.versions:
            for utt in version.utterances:
                if utt.class_label != self.class_id:
                    raise InvalidInputError(
                        f"dataset {self.class_id} contains an utterance labeled {utt.class_label}"
                    )

    @property
    def latest(self) -> DatasetVersion:
        return self.versions[-1]


@dataclass(frozen=True)
class CopyProvenance:
    sampling_fraction: float
    staleness_months: int
    seed: int
    as_of_month: int


@dataclass(frozen=True)
class DatasetCopy:
    """Snapshot of a source dataset held by another class's trainer."""

    source_class: int
    consumer_class: int
    utterances: tuple[Utterance, ...]
    provenance: CopyProvenance

    def __post_init__(self):
        if self.source_class == self.consumer_class:
            raise InvalidInputError("a dataset copy must belong to a different consumer class")

    @property
    def is_empty(self) -> bool:
        return len(self.utterances) == 0


def _sample_indices(n: int, fraction: float, seed: int) -> np.ndarray:
    """ceil(fraction * n) distinct indices, ascending. fraction 1.0 keeps all."""
    m = math.ceil(fraction * n)
    if m >= n:
        return np.arange(n)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=m, replace=False))


def subsample(dataset: Dataset, fraction: float, seed: int, consumer_class: int) -> DatasetCopy:
    """Uniform without-replacement sample of the latest version.

    Picks ceil(fraction * n) utterances, preserving source order, so a
    fraction of 1.0 reproduces the latest version exactly.
    """
    if not 0 < fraction <= 1:
        raise InvalidInputError(f"fraction must be in (0, 1], got {fraction}")
    latest = dataset.latest
    if len(latest.utterances) == 0:
        raise InvalidInputError(f"dataset {dataset.class_id} latest version is empty")
    idx = _sample_indices(len(latest.utterances), fraction, seed)
    return DatasetCopy(
        source_class=dataset.class_id,
        consumer_class=consumer_class,
        utterances=tuple(latest.utterances[i] for i in idx),
        provenance=CopyProvenance(
            sampling_fraction=fraction,
            staleness_months=0,
            seed=seed,
            as_of_month=latest.timestamp,
        ),
    )


def stale_snapshot(dataset: Dataset, now: int, staleness: int, consumer_class: int) -> DatasetCopy:
    """Newest version at least `staleness` months old, or an empty flagged copy.

    A class whose history starts within the staleness window has no
    eligible version; the copy comes back empty rather than erroring,
    matching the newly-launched-class regime.
    """
    if staleness < 0:
        raise InvalidInputError(f"staleness must be >= 0, got {staleness}")
    visible = [v for v in dataset.versions if v.timestamp <= now]
    if not visible:
        raise InvalidInputError(
            f"dataset {dataset.class_id} has no version at or before month {now}"
        )
    eligible = [v for v in visible if v.timestamp <= now - staleness]
    utterances: tuple[Utterance, ...] = eligible[-1].utterances if eligible else ()
    return DatasetCopy(
        source_class=dataset.class_id,
        consumer_class=consumer_class,
        utterances=utterances,
        provenance=CopyProvenance(
            sampling_fraction=1.0, staleness_months=staleness, seed=0, as_of_month=now
        ),
    )


def materialize_copy(
    dataset: Dataset,
    consumer_class: int,
    fraction: float = 1.0,
    staleness: int = 0,
    now: int | None = None,
    seed: int = 0,
) -> DatasetCopy:
    """Stale snapshot first, then sub-sampling of the snapshot."""
    if not 0 < fraction <= 1:
        raise InvalidInputError(f"fraction must be in (0, 1], got {fraction}")
    if now is None:
        now = dataset.latest.timestamp
    snap = stale_snapshot(dataset, now=now, staleness=staleness, consumer_class=consumer_class)
    if snap.is_empty or fraction == 1.0:
        utterances = snap.utterances
    else:
        idx = _sample_indices(len(snap.utterances), fraction, seed)
        utterances = tuple(snap.utterances[i] for i in idx)
    return DatasetCopy(
        source_class=dataset.class_id,
        consumer_class=consumer_class,
        utterances=utterances,
        provenance=CopyProvenance(
            sampling_fraction=fraction, staleness_months=staleness, seed=seed, as_of_month=now
        ),
    )


@dataclass
class Registry:
    """All datasets plus the copy held by every (source, consumer) pair."""

    datasets: list[Dataset]
    copies: dict[tuple[int, int], DatasetCopy] = field(default_factory=dict)

    def __post_init__(self):
        ids = [d.class_id for d in self.datasets]
        if ids != list(range(len(self.datasets))):
            raise InvalidInputError(f"dataset class_ids must be 0..K-1 in order, got {ids}")

    @property
    def k(self) -> int:
        return len(self.datasets)

    def pairs(self) -> list[tuple[int, int]]:
        return [(s, c) for s in range(self.k) for c in range(self.k) if s != c]

    @property
    def fully_materialized(self) -> bool:
        return all(pair in self.copies for pair in self.pairs())

    def materialize(
        self,
        fraction: float = 1.0,
        staleness: int = 0,
        now: int | None = None,
        seed: int = 0,
    ) -> None:
        """Build every (source, consumer) copy; each pair gets its own sub-seed."""
        if now is None:
            now = max(d.latest.timestamp for d in self.datasets)
        for source, consumer in self.pairs():
            self.copies[(source, consumer)] = materialize_copy(
                self.datasets[source],
                consumer_class=consumer,
                fraction=fraction,
                staleness=staleness,
                now=now,
                seed=mix_seed(seed, source, consumer),
            )


# ---------------------------------------------------------------------------
# Synthetic corpora


def _length_range(sentence_length: tuple[int, int]) -> tuple[int, int]:
    lo, hi = sentence_length
    if lo < 1 or hi < lo:
        raise InvalidInputError(f"invalid sentence length range {sentence_length}")
    return lo, hi


def _draw_utterance(
    rng: np.random.Generator,
    class_vocab: list[str],
    shared_vocab: list[str],
    overlap: float,
    lo: int,
    hi: int,
    label: int,
) -> Utterance:
    length = int(rng.integers(lo, hi + 1))
    tokens = []
    for _ in range(length):
        if shared_vocab and rng.random() < overlap:
            tokens.append(shared_vocab[int(rng.integers(len(shared_vocab)))])
        else:
            tokens.append(class_vocab[int(rng.integers(len(class_vocab)))])
    return Utterance(tokens=tuple(tokens), class_label=label)


def generate_synthetic_corpus(
    k: int,
    per_class: int,
    vocab_per_class: int,
    overlap: float,
    sentence_length: tuple[int, int],
    seed: int,
    shared_vocab_size: int | None = None,
) -> list[Dataset]:
    """K single-version datasets with class-conditional vocabularies.

    Each class draws from its own token set; an `overlap` fraction of
    token slots draws from a vocabulary shared by all classes, which
    controls how separable the classes are.
    """
    if k < 2:
        raise InvalidInputError(f"need at least 2 classes, got {k}")
    if per_class < 1:
        raise InvalidInputError(f"per_class must be >= 1, got {per_class}")
    if vocab_per_class < 1:
        raise InvalidInputError(f"vocab_per_class must be >= 1, got {vocab_per_class}")
    if not 0 <= overlap <= 1:
        raise InvalidInputError(f"overlap must be in [0, 1], got {overlap}")
    lo, hi = _length_range(sentence_length)
    if shared_vocab_size is None:
        shared_vocab_size = vocab_per_class
    shared = [f"shw{i}" for i in range(shared_vocab_size)]
    datasets = []
    for c in range(k):
        vocab = [f"c{c}w{i}" for i in range(vocab_per_class)]
        rng = np.random.default_rng(mix_seed(seed, "class", c))
        utts = tuple(
            _draw_utterance(rng, vocab, shared, overlap, lo, hi, c) for _ in range(per_class)
        )
        datasets.append(Dataset(class_id=c, versions=(DatasetVersion(0, utts),)))
    return datasets


def generate_evolving_corpus(
    k: int,
    per_class: int,
    vocab_per_class: int,
    overlap: float,
    sentence_length: tuple[int, int],
    months: int,
    seed: int,
    growth: float = 0.10,
    vocab_shift: float = 0.05,
    launch_months: dict[int, int] | None = None,
    shared_vocab_size: int | None = None,
) -> list[Dataset]:
    """Multi-version corpus with monthly growth and vocabulary drift.

    Every class starts with `per_class` utterances at its launch month
    (0 unless overridden) and each following month appends a `growth`
    fraction of new utterances drawn after redrawing a `vocab_shift`
    fraction of the class vocabulary. Versions are append-only: every
    version is a prefix of the next one.
    """
    if months < 0:
        raise InvalidInputError(f"months must be >= 0, got {months}")
    if k < 2:
        raise InvalidInputError(f"need at least 2 classes, got {k}")
    if not 0 <= overlap <= 1:
        raise InvalidInputError(f"overlap must be in [0, 1], got {overlap}")
    lo, hi = _length_range(sentence_length)
    if shared_vocab_size is None:
        shared_vocab_size = vocab_per_class
    launch_months = launch_months or {}
    shared = [f"shw{i}" for i in range(shared_vocab_size)]
    datasets = []
    for c in range(k):
        launch = launch_months.get(c, 0)
        if not 0 <= launch <= months:
            raise InvalidInputError(
                f"class {c} launch month {launch} outside [0, {months}]"
            )
        rng = np.random.default_rng(mix_seed(seed, "class", c))
        vocab = [f"c{c}w{i}" for i in range(vocab_per_class)]
        utts = [
            _draw_utterance(rng, vocab, shared, overlap, lo, hi, c) for _ in range(per_class)
        ]
        versions = [DatasetVersion(launch, tuple(utts))]
        for month in range(launch + 1, months + 1):
            n_shift = math.ceil(vocab_shift * len(vocab))
            for j in rng.choice(len(vocab), size=n_shift, replace=False):
                vocab[int(j)] = f"c{c}m{month}w{int(j)}"
            n_new = math.ceil(growth * len(utts))
            utts.extend(
                _draw_utterance(rng, vocab, shared, overlap, lo, hi, c) for _ in range(n_new)
            )
            versions.append(DatasetVersion(month, tuple(utts)))
        datasets.append(Dataset(class_id=c, versions=tuple(versions)))
    return datasets


# ---------------------------------------------------------------------------
# Splitting and merging


def _apportion(n: int, ratios: tuple[float, float, float]) -> list[int]:
    """Largest-remainder split sizes; every part gets at least one item."""
    quotas = [r * n for r in ratios]
    counts = [math.floor(q) for q in quotas]
    remainders = sorted(
        range(len(ratios)), key=lambda i: (quotas[i] - counts[i], -i), reverse=True
    )
    for i in range(n - sum(counts)):
        counts[remainders[i % len(ratios)]] += 1
    # Splits must be usable downstream, so no part may come out empty.
    for i, c in enumerate(counts):
        if c == 0:
            donor = counts.index(max(counts))
            counts[donor] -= 1
            counts[i] = 1
    return counts


def _validate_ratios(ratios: tuple[float, float, float]) -> None:
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise InvalidInputError(f"ratios must be three positive numbers, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise InvalidInputError(f"ratios must sum to 1, got {sum(ratios)}")


def _split_indices(
    n: int, ratios: tuple[float, float, float], seed: int
) -> tuple[list[int], list[int], list[int]]:
    counts = _apportion(n, ratios)
    perm = np.random.default_rng(seed).permutation(n)
    out, start = [], 0
    for c in counts:
        out.append(sorted(int(i) for i in perm[start : start + c]))
        start += c
    return out[0], out[1], out[2]


def split_speaker_independent(
    datasets: list[Dataset],
    ratios: tuple[float, float, float],
    seed: int,
) -> tuple[list[Dataset], list[Dataset], list[Dataset]]:
    """Disjoint train/dev/test partition of each class's latest version.

    Synthetic utterances carry no speaker identity, so the partition is
    by utterance.
    """
    _validate_ratios(ratios)
    train, dev, test = [], [], []
    for dataset in datasets:
        latest = dataset.latest
        n = len(latest.utterances)
        if n < 3:
            raise InvalidInputError(
                f"class {dataset.class_id} has {n} utterances; need at least 3 to split"
            )
        parts = _split_indices(n, ratios, mix_seed(seed, "split", dataset.class_id))
        for bucket, idx in zip((train, dev, test), parts):
            bucket.append(
                Dataset(
                    class_id=dataset.class_id,
                    versions=(
                        DatasetVersion(
                            latest.timestamp,
                            tuple(latest.utterances[i] for i in idx),
                        ),
                    ),
                )
            )
    return train, dev, test


def split_timeline(
    datasets: list[Dataset],
    ratios: tuple[float, float, float],
    seed: int,
) -> tuple[list[Dataset], list[Dataset], list[Dataset]]:
    """Split append-only histories: train keeps the whole version timeline.

    The final version is partitioned like split_speaker_independent; each
    earlier version, being a prefix of the final one, keeps exactly its
    train-side utterances. Dev and test keep only the final version.
    """
    _validate_ratios(ratios)
    train, dev, test = [], [], []
    for dataset in datasets:
        final = dataset.latest
        n = len(final.utterances)
        if n < 3:
            raise InvalidInputError(
                f"class {dataset.class_id} has {n} utterances; need at least 3 to split"
            )
        for version in dataset.versions:
            if version.utterances != final.utterances[: len(version.utterances)]:
                raise InvalidInputError(
                    f"class {dataset.class_id} history is not append-only; "
                    "split_timeline requires prefix versions"
                )
        train_idx, dev_idx, test_idx = _split_indices(
            n, ratios, mix_seed(seed, "split", dataset.class_id)
        )
        train_versions = []
        for version in dataset.versions:
            m = len(version.utterances)
            kept = tuple(final.utterances[i] for i in train_idx if i < m)
            train_versions.append(DatasetVersion(version.timestamp, kept))
        train.append(Dataset(class_id=dataset.class_id, versions=tuple(train_versions)))
        dev.append(
            Dataset(
                class_id=dataset.class_id,
                versions=(
                    DatasetVersion(final.timestamp, tuple(final.utterances[i] for i in dev_idx)),
                ),
            )
        )
        test.append(
            Dataset(
                class_id=dataset.class_id,
                versions=(
                    DatasetVersion(final.timestamp, tuple(final.utterances[i] for i in test_idx)),
                ),
            )
        )
    return train, dev, test


def merge_classes(datasets: list[Dataset], target_k: int, seed: int) -> list[Dataset]:
    """Seeded random grouping of K classes into target_k non-empty groups.

    Merging operates on latest versions; each output dataset is the
    relabeled union of its group. target_k == K keeps classes as they
    are.
    """
    k = len(datasets)
    if target_k > k:
        raise InvalidInputError(f"target_k {target_k} exceeds class count {k}")
    if target_k < 2:
        raise InvalidInputError(f"target_k must be >= 2, got {target_k}")
    if target_k == k:
        groups = [[c] for c in range(k)]
    else:
        rng = np.random.default_rng(seed)
        perm = [int(c) for c in rng.permutation(k)]
        groups = [[perm[g]] for g in range(target_k)]
        for c in perm[target_k:]:
            groups[int(rng.integers(target_k))].append(c)
    merged = []
    for gid, members in enumerate(groups):
        utts = []
        timestamp = 0
        for c in sorted(members):
            latest = datasets[c].latest
            timestamp = max(timestamp, latest.timestamp)
            utts.extend(Utterance(u.tokens, gid) for u in latest.utterances)
        merged.append(Dataset(class_id=gid, versions=(DatasetVersion(timestamp, tuple(utts)),)))
    return merged


# ---------------------------------------------------------------------------
# Corpus files and the registry manifest


def write_corpus_file(path: str | Path, utterances: tuple[Utterance, ...] | list[Utterance]) -> None:
    """One utterance per line: `<class_id>\\t<token token ...>`."""
    with open(path, "w", encoding="utf-8") as fh:
        for utt in utterances:
            fh.write(f"{utt.class_label}\t{' '.join(utt.tokens)}\n")


def read_corpus_file(path: str | Path) -> list[Utterance]:
    utterances = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            label_text, sep, token_text = line.partition("\t")
            if not sep:
                raise ParseError("expected `<class_id>\\t<tokens>`", line=lineno)
            try:
                label = int(label_text)
            except ValueError:
                raise ParseError(f"non-integer class id {label_text!r}", line=lineno)
            tokens = tuple(token_text.split())
            if not tokens:
                raise ParseError("utterance has no tokens", line=lineno)
            utterances.append(Utterance(tokens=tokens, class_label=label))
    return utterances


def save_registry(registry: Registry, out_dir: str | Path, config_digest: str = "") -> Path:
    """Write one corpus file per (class, version) plus manifest.json.

    Copies are persisted as provenance records, not as files; loading
    rebuilds them deterministically from the recorded seeds.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest: dict = {"k": registry.k, "datasets": [], "copies": [], "config_digest": config_digest}
    for dataset in registry.datasets:
        entry = {"class_id": dataset.class_id, "versions": []}
        for version in dataset.versions:
            name = f"class{dataset.class_id:03d}_m{version.timestamp:03d}.txt"
            write_corpus_file(out / name, version.utterances)
            entry["versions"].append({"timestamp": version.timestamp, "path": name})
        manifest["datasets"].append(entry)
    for (source, consumer), copy in sorted(registry.copies.items()):
        manifest["copies"].append(
            {
                "source": source,
                "consumer": consumer,
                "sampling_fraction": copy.provenance.sampling_fraction,
                "staleness_months": copy.provenance.staleness_months,
                "seed": copy.provenance.seed,
                "as_of_month": copy.provenance.as_of_month,
            }
        )
    manifest_path = out / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path


def load_registry(manifest_path: str | Path) -> Registry:
    """Load datasets from a manifest and rebuild copies from provenance."""
    manifest_path = Path(manifest_path)
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"manifest is not valid JSON: {exc}")
    base = manifest_path.parent
    datasets = []
    for entry in sorted(manifest.get("datasets", []), key=lambda e: e["class_id"]):
        versions = []
        for record in entry["versions"]:
            utts = read_corpus_file(base / record["path"])
            versions.append(DatasetVersion(int(record["timestamp"]), tuple(utts)))
        datasets.append(Dataset(class_id=int(entry["class_id"]), versions=tuple(versions)))
    registry = Registry(datasets=datasets)
    for record in manifest.get("copies", []):
        source, consumer = int(record["source"]), int(record["consumer"])
        registry.copies[(source, consumer)] = materialize_copy(
            registry.datasets[source],
            consumer_class=consumer,
            fraction=float(record["sampling_fraction"]),
            staleness=int(record["staleness_months"]),
            now=int(record["as_of_month"]),
            seed=int(record["seed"]),
        )
    return registry
