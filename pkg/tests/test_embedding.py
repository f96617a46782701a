"""Tokenization, embedding tables, and bag-of-words sentence vectors."""

import numpy as np
import pytest

from ova_drift.embedding import (
    EmbeddingTable,
    OovPolicy,
    embed_sentence,
    embed_sentences,
    hash_embedding,
    load_embedding_table,
    tokenize,
)
from ova_drift.errors import ConfigError, InvalidInputError, ParseError


def test_tokenize_lowercases_and_splits_on_whitespace():
    assert tokenize("Turn ON the  kitchen Light") == ["turn", "on", "the", "kitchen", "light"]
    assert tokenize("  \t ") == []
    assert tokenize("one") == ["one"]


def test_load_table_direct_parse(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("hello 0.5 -0.5\n")
    table = load_embedding_table(path, dimension=2)
    assert np.array_equal(table.lookup("hello"), np.array([0.5, -0.5]))


def test_load_table_last_occurrence_wins(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("a 1 0\na 0 1\n")
    table = load_embedding_table(path, dimension=2)
    assert np.array_equal(table.lookup("a"), np.array([0.0, 1.0]))


def test_load_table_arity_error_names_line(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("bad 0.1\n")
    with pytest.raises(ParseError, match="line 1"):
        load_embedding_table(path, dimension=2)


def test_load_table_dimension_diagnostic(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("tok 0.1 0.2 0.3\n")
    with pytest.raises(ParseError, match="expected dimension 8"):
        load_embedding_table(path, dimension=8)


def test_load_table_non_numeric_component(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("ok 1 2\nbroken 1 x\n")
    with pytest.raises(ParseError, match="line 2"):
        load_embedding_table(path, dimension=2)


def test_load_table_rejects_bad_dimension(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("a 1\n")
    with pytest.raises(ConfigError):
        load_embedding_table(path, dimension=0)


def test_load_table_skips_blank_lines(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("\na 1 2\n\n")
    table = load_embedding_table(path, dimension=2)
    assert np.array_equal(table.lookup("a"), np.array([1.0, 2.0]))


def test_hash_embedding_deterministic():
    assert np.array_equal(hash_embedding("foo", 4, 7), hash_embedding("foo", 4, 7))


def test_hash_embedding_distinct_across_tokens():
    vectors = {hash_embedding(f"tok{i}", 4, 7).tobytes() for i in range(100)}
    assert len(vectors) == 100


def test_hash_embedding_seed_sensitivity():
    assert not np.array_equal(hash_embedding("foo", 4, 7), hash_embedding("foo", 4, 8))


def test_hash_embedding_components_bounded():
    for token in ("a", "b", "some-longer-token", "0"):
        vec = hash_embedding(token, 16, 3)
        assert vec.shape == (16,)
        assert np.all(vec >= -1.0) and np.all(vec <= 1.0)


def test_hash_embedding_rejects_bad_dimension():
    with pytest.raises(InvalidInputError):
        hash_embedding("foo", 0, 1)


def test_table_rejects_wrong_shape_entry():
    with pytest.raises(InvalidInputError):
        EmbeddingTable(dimension=2, entries={"a": np.zeros(3)})


def test_table_rejects_nonfinite_entry():
    with pytest.raises(InvalidInputError):
        EmbeddingTable(dimension=2, entries={"a": np.array([0.0, np.nan])})


def _two_token_table():
    return EmbeddingTable(
        dimension=2,
        entries={"a": np.array([1.0, 0.0]), "b": np.array([0.0, 1.0])},
    )


def test_embed_mean_of_identical_tokens():
    table = _two_token_table()
    assert np.array_equal(embed_sentence(["a", "a", "a"], table), np.array([1.0, 0.0]))


def test_embed_two_token_mean():
    table = _two_token_table()
    assert np.array_equal(embed_sentence(["a", "b"], table), np.array([0.5, 0.5]))


def test_embed_oov_zero_vector_contributes_origin():
    table = _two_token_table()
    assert table.oov_policy is OovPolicy.ZERO_VECTOR
    assert np.array_equal(embed_sentence(["a", "zzz"], table), np.array([0.5, 0.0]))


def test_embed_oov_hash_fallback():
    table = EmbeddingTable.hashed(dimension=4, seed=9)
    assert np.array_equal(embed_sentence(["zzz"], table), hash_embedding("zzz", 4, 9))


def test_embed_permutation_invariant_bitwise():
    table = EmbeddingTable.hashed(dimension=8, seed=0)
    tokens = ["e", "b", "a", "c", "b", "d", "a", "a"]
    shuffled = ["a", "a", "a", "b", "b", "c", "d", "e"]
    reversed_ = list(reversed(tokens))
    base = embed_sentence(tokens, table)
    assert np.array_equal(base, embed_sentence(shuffled, table))
    assert np.array_equal(base, embed_sentence(reversed_, table))


def test_embed_components_bounded_by_token_extremes():
    table = EmbeddingTable.hashed(dimension=6, seed=1)
    tokens = ["alpha", "beta", "gamma", "delta", "beta"]
    vectors = np.stack([table.lookup(t) for t in tokens])
    emb = embed_sentence(tokens, table)
    assert np.all(emb >= vectors.min(axis=0) - 1e-12)
    assert np.all(emb <= vectors.max(axis=0) + 1e-12)


def test_embed_rejects_empty_sentence():
    with pytest.raises(InvalidInputError):
        embed_sentence([], _two_token_table())


def test_embed_sentences_stacks_rows():
    table = _two_token_table()
    out = embed_sentences([["a"], ["b"], ["a", "b"]], table)
    assert out.shape == (3, 2)
    assert np.array_equal(out[2], np.array([0.5, 0.5]))
    with pytest.raises(InvalidInputError):
        embed_sentences([], table)
