"""Ingestion, tokenization, vocabulary, and sampling contracts."""

import csv
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kwsent.corpus import (
    PAD_INDEX,
    UNK_INDEX,
    Corpus,
    Document,
    build_vocab,
    load_corpus,
    sample_corpus,
    tokenize,
)
from kwsent.exceptions import CorpusFormatError, CorpusValidationError


def write_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_ALL)
        writer.writerows(rows)


class TestTokenize:
    def test_lowercase_and_split(self):
        assert tokenize("It's easily the BEST film") == [
            "it", "s", "easily", "the", "best", "film",
        ]

    def test_empty_input(self):
        assert tokenize("") == []

    def test_punctuation_dropped(self):
        assert tokenize("good,good!") == ["good", "good"]

    def test_numbers_kept(self):
        assert tokenize("rated 10/10") == ["rated", "10", "10"]

    @given(st.text())
    def test_tokens_are_lowercase_alnum(self, text):
        for token in tokenize(text):
            assert token == token.lower()
            assert all(ch.isalnum() and ch != "_" for ch in token)


class TestLoadCorpus:
    def test_one_based_to_zero_based(self, tmp_path):
        path = tmp_path / "train.csv"
        write_csv(path, [["3", "title", "body"]])
        corpus = load_corpus(path, num_classes=4)
        assert corpus.documents[0].label == 2
        assert corpus.documents[0].tokens == ("title", "body")

    def test_title_and_body_concatenated(self, tmp_path):
        path = tmp_path / "train.csv"
        write_csv(path, [["1", "good film", "bad ending"]])
        corpus = load_corpus(path, num_classes=2)
        assert corpus.documents[0].tokens == ("good", "film", "bad", "ending")

    def test_class_out_of_range(self, tmp_path):
        path = tmp_path / "train.csv"
        write_csv(path, [["5", "text here"]])
        with pytest.raises(CorpusValidationError):
            load_corpus(path, num_classes=4)

    def test_malformed_class_reports_line(self, tmp_path):
        path = tmp_path / "train.csv"
        write_csv(path, [["1", "fine row"], ["abc", "bad row"]])
        with pytest.raises(CorpusFormatError, match="line 2"):
            load_corpus(path, num_classes=2)

    def test_too_few_columns_reports_line(self, tmp_path):
        path = tmp_path / "train.csv"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write('"1","ok text"\n"2"\n')
        with pytest.raises(CorpusFormatError, match="line 2"):
            load_corpus(path, num_classes=2)

    def test_empty_text_rejected(self, tmp_path):
        path = tmp_path / "train.csv"
        write_csv(path, [["1", "...!!!"]])
        with pytest.raises(CorpusValidationError):
            load_corpus(path, num_classes=2)

    def test_ids_ascend_with_row_order(self, tmp_path):
        path = tmp_path / "train.csv"
        write_csv(path, [["1", f"text number {i}"] for i in range(20)])
        corpus = load_corpus(path, num_classes=2)
        assert [d.id for d in corpus] == list(range(20))

    def test_max_len_truncates_tail(self, tmp_path):
        path = tmp_path / "train.csv"
        write_csv(path, [["1", " ".join(f"w{i}" for i in range(40))]])
        corpus = load_corpus(path, num_classes=2, max_len=10)
        assert corpus.documents[0].tokens == tuple(f"w{i}" for i in range(10))


class TestSampleCorpus:
    def _corpus(self, n):
        docs = tuple(Document(i, 0, (f"tok{i}",)) for i in range(n))
        return Corpus(docs, num_classes=1)

    def test_size_is_ceil(self):
        corpus = self._corpus(1000)
        assert len(sample_corpus(corpus, 0.0015, seed=0)) == 2  # ceil(1.5)

    def test_permille_of_large_corpus(self):
        corpus = self._corpus(120_000)
        assert len(sample_corpus(corpus, 0.001, seed=0)) == 120

    def test_full_ratio_returns_all(self):
        corpus = self._corpus(57)
        assert sample_corpus(corpus, 1.0, seed=3) == set(range(57))

    def test_same_seed_same_set(self):
        corpus = self._corpus(500)
        a = sample_corpus(corpus, 0.1, seed=42)
        b = sample_corpus(corpus, 0.1, seed=42)
        assert a == b

    def test_ratio_out_of_range(self):
        corpus = self._corpus(10)
        for ratio in (0.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                sample_corpus(corpus, ratio, seed=0)

    def test_union_over_seeds_covers_corpus(self):
        corpus = self._corpus(50)
        union = set()
        for seed in range(200):
            picked = sample_corpus(corpus, 0.1, seed=seed)
            assert len(picked) == 5
            union |= picked
        assert union == set(range(50))


class TestBuildVocab:
    def _corpus(self, token_lists):
        docs = tuple(
            Document(i, 0, tuple(tokens)) for i, tokens in enumerate(token_lists)
        )
        return Corpus(docs, num_classes=1)

    def test_min_freq_threshold(self):
        vocab = build_vocab(self._corpus([["a", "a", "b"]]), min_freq=2)
        assert "a" in vocab
        assert "b" not in vocab
        assert vocab.index("b") == UNK_INDEX

    def test_min_freq_one_keeps_all(self):
        vocab = build_vocab(self._corpus([["x", "y"], ["z"]]), min_freq=1)
        assert {"x", "y", "z"} <= set(vocab.index_to_token)

    def test_frequency_then_lexicographic_order(self):
        vocab = build_vocab(
            self._corpus([["b", "b", "a", "a", "c", "c", "c"]]), min_freq=1
        )
        # c has freq 3; a and b tie at 2 and order lexicographically.
        assert vocab.index_to_token[2:] == ("c", "a", "b")

    def test_reserved_indices(self):
        vocab = build_vocab(self._corpus([["a"]]), min_freq=1)
        assert vocab.pad_index == PAD_INDEX == 0
        assert vocab.unk_index == UNK_INDEX == 1

    def test_encode_never_maps_to_pad(self):
        corpus = self._corpus([["a", "a"], ["b"]])
        vocab = build_vocab(corpus, min_freq=2)
        for doc in corpus:
            encoded = vocab.encode(doc.tokens)
            assert np.all(encoded != PAD_INDEX)
            for token, idx in zip(doc.tokens, encoded):
                assert idx == vocab.token_to_index.get(token, UNK_INDEX)
