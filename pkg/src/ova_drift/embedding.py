"""Token and sentence embeddings.

Sentences are represented as the arithmetic mean of their word vectors.
Word vectors come either from a word2vec-style text file or from a
seeded hash of the token, which lets synthetic corpora run without any
trained table.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvalidInputError, ParseError


class OovPolicy(Enum):
    """What a lookup returns for a token missing from the table."""

    ZERO_VECTOR = "zero_vector"
    HASH_FALLBACK = "hash_fallback"


def tokenize(text: str) -> list[str]:
    """Whitespace tokenization with lowercase folding."""
    return text.lower().split()


@lru_cache(maxsize=65536)
def _hash_components(token: str, dimension: int, seed: int) -> tuple[float, ...]:
    # 8 bytes per component, drawn from chained blake2b blocks.
    raw = b""
    block = 0
    while len(raw) < 8 * dimension:
        h = hashlib.blake2b(f"{seed}|{token}|{block}".encode("utf-8"), digest_size=64)
        raw += h.digest()
        block += 1
    full = 2**64 - 1
    return tuple(
        2.0 * int.from_bytes(raw[8 * i : 8 * i + 8], "big") / full - 1.0
        for i in range(dimension)
    )


def hash_embedding(token: str, dimension: int, seed: int) -> np.ndarray:
    """Deterministic pseudo-random vector for `token`, components in [-1, 1].

    The same (token, dimension, seed) triple always yields the same
    vector; changing any of the three yields an unrelated one.
    """
    if dimension < 1:
        raise InvalidInputError(f"dimension must be >= 1, got {dimension}")
    return np.array(_hash_components(token, dimension, seed), dtype=np.float64)


@dataclass(frozen=True)
class EmbeddingTable:
    """Immutable token -> vector map with a fixed dimension and OOV policy."""

    dimension: int
    entries: dict[str, np.ndarray] = field(default_factory=dict)
    oov_policy: OovPolicy = OovPolicy.ZERO_VECTOR
    hash_seed: int = 0

    def __post_init__(self):
        if self.dimension < 1:
            raise InvalidInputError(f"dimension must be >= 1, got {self.dimension}")
        for token, vec in self.entries.items():
            if vec.shape != (self.dimension,):
                raise InvalidInputError(
                    f"vector for token {token!r} has shape {vec.shape}, "
                    f"expected ({self.dimension},)"
                )
            if not np.all(np.isfinite(vec)):
                raise InvalidInputError(f"vector for token {token!r} has non-finite components")

    @classmethod
    def hashed(cls, dimension: int, seed: int = 0) -> "EmbeddingTable":
        """Table with no stored entries; every token resolves via hashing."""
        return cls(dimension=dimension, entries={}, oov_policy=OovPolicy.HASH_FALLBACK, hash_seed=seed)

    def lookup(self, token: str) -> np.ndarray:
        vec = self.entries.get(token)
        if vec is not None:
            return vec
        if self.oov_policy is OovPolicy.HASH_FALLBACK:
            return hash_embedding(token, self.dimension, self.hash_seed)
        return np.zeros(self.dimension, dtype=np.float64)


def load_embedding_table(
    path: str | Path,
    dimension: int,
    oov_policy: OovPolicy = OovPolicy.ZERO_VECTOR,
    hash_seed: int = 0,
) -> EmbeddingTable:
    """Parse a word2vec-text file: one `token v1 ... vd` entry per line.

    Duplicate tokens resolve last-occurrence-wins. Malformed lines raise
    ParseError naming the 1-based line number.
    """
    if dimension < 1:
        raise ConfigError(f"dimension must be >= 1, got {dimension}")
    entries: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.split()
            if not fields:
                continue
            token, values = fields[0], fields[1:]
            if len(values) != dimension:
                raise ParseError(
                    f"token {token!r} has {len(values)} components, expected dimension {dimension}",
                    line=lineno,
                )
            try:
                vec = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError:
                raise ParseError(f"non-numeric component for token {token!r}", line=lineno)
            if not np.all(np.isfinite(vec)):
                raise ParseError(f"non-finite component for token {token!r}", line=lineno)
            entries[token] = vec
    return EmbeddingTable(
        dimension=dimension, entries=entries, oov_policy=oov_policy, hash_seed=hash_seed
    )


def embed_sentence(tokens: list[str] | tuple[str, ...], table: EmbeddingTable) -> np.ndarray:
    """Mean of the per-token vectors.

    Accumulates over sorted distinct tokens weighted by count, so the
    result is exactly permutation-invariant (bag of words).
    """
    if len(tokens) == 0:
        raise InvalidInputError("cannot embed an empty token sequence")
    counts: dict[str, int] = {}
    for token in tokens:
        counts[token] = counts.get(token, 0) + 1
    total = np.zeros(table.dimension, dtype=np.float64)
    for token in sorted(counts):
        total += counts[token] * table.lookup(token)
    return total / len(tokens)


def embed_sentences(
    sentences: list[list[str]] | list[tuple[str, ...]], table: EmbeddingTable
) -> np.ndarray:
    """Stack sentence embeddings into an (n, dimension) array."""
    if len(sentences) == 0:
        raise InvalidInputError("cannot embed an empty sentence list")
    return np.stack([embed_sentence(tokens, table) for tokens in sentences])
