"""Embedding table loading, random init, and lookup contracts."""

import numpy as np
import pytest

from kwsent.corpus import PAD_INDEX, Vocabulary
from kwsent.embeddings import (
    EmbeddingTable,
    init_random,
    load_pretrained,
    load_text,
    save_text,
)
from kwsent.exceptions import EmbeddingFormatError


@pytest.fixture
def vocab():
    return Vocabulary.from_tokens(["good", "bad", "film"])


class TestInitRandom:
    def test_deterministic_per_seed(self, vocab):
        a = init_random(vocab, dim=8, seed=7)
        b = init_random(vocab, dim=8, seed=7)
        np.testing.assert_array_equal(a.matrix, b.matrix)

    def test_pad_row_zero(self, vocab):
        table = init_random(vocab, dim=8, seed=0)
        np.testing.assert_array_equal(table.matrix[PAD_INDEX], np.zeros(8))

    def test_shape_and_finiteness(self):
        vocab = Vocabulary.from_tokens([f"t{i}" for i in range(998)])
        table = init_random(vocab, dim=50, seed=1)
        assert table.matrix.shape == (1000, 50)
        assert np.all(np.isfinite(table.matrix))

    def test_rows_within_init_range(self, vocab):
        table = init_random(vocab, dim=16, seed=2)
        assert np.all(np.abs(table.matrix) < 0.05 + 1e-12)

    def test_dim_too_small(self, vocab):
        with pytest.raises(ValueError):
            init_random(vocab, dim=1, seed=0)


class TestLoadPretrained:
    def _write(self, path, rows):
        with open(path, "w", encoding="utf-8") as fh:
            for token, values in rows:
                fh.write(token + " " + " ".join(str(v) for v in values) + "\n")

    def test_found_token_gets_file_vector(self, tmp_path, vocab):
        path = tmp_path / "vectors.txt"
        vec = [round(0.1 * i, 1) for i in range(4)]
        self._write(path, [("good", vec)])
        table = load_pretrained(path, vocab, dim=4)
        np.testing.assert_allclose(table.matrix[vocab.token_to_index["good"]], vec)

    def test_missing_token_gets_seeded_uniform_row(self, tmp_path, vocab):
        path = tmp_path / "vectors.txt"
        self._write(path, [("good", [0.0, 0.0, 0.0, 0.5])])
        a = load_pretrained(path, vocab, dim=4, oov_seed=9)
        b = load_pretrained(path, vocab, dim=4, oov_seed=9)
        row = a.matrix[vocab.token_to_index["bad"]]
        assert np.all(np.abs(row) <= 0.05)
        np.testing.assert_array_equal(a.matrix, b.matrix)

    def test_dimension_mismatch_reports_line(self, tmp_path, vocab):
        path = tmp_path / "vectors.txt"
        self._write(path, [("good", [0.1, 0.2, 0.3, 0.4]), ("bad", [0.1, 0.2, 0.3])])
        with pytest.raises(EmbeddingFormatError, match="line 2"):
            load_pretrained(path, vocab, dim=4)

    def test_coverage_fraction(self, tmp_path, vocab):
        path = tmp_path / "vectors.txt"
        self._write(path, [("good", [1, 2]), ("film", [3, 4]), ("extra", [5, 6])])
        table = load_pretrained(path, vocab, dim=2)
        assert table.coverage == pytest.approx(2 / 3)
        assert 0.0 <= table.coverage <= 1.0

    def test_pad_row_stays_zero(self, tmp_path, vocab):
        path = tmp_path / "vectors.txt"
        self._write(path, [("good", [1.0, 2.0])])
        table = load_pretrained(path, vocab, dim=2)
        np.testing.assert_array_equal(table.matrix[PAD_INDEX], [0.0, 0.0])


class TestLookup:
    def test_pad_lookup_is_zero(self, vocab):
        table = init_random(vocab, dim=4, seed=0)
        np.testing.assert_array_equal(table.lookup(PAD_INDEX), np.zeros(4))

    def test_lookup_returns_stored_row(self, vocab):
        table = init_random(vocab, dim=4, seed=0)
        idx = vocab.token_to_index["film"]
        np.testing.assert_array_equal(table.lookup(idx), table.matrix[idx])

    def test_repeated_lookup_identical(self, vocab):
        table = init_random(vocab, dim=4, seed=0)
        np.testing.assert_array_equal(table.lookup(3), table.lookup(3))

    def test_out_of_range(self, vocab):
        table = init_random(vocab, dim=4, seed=0)
        with pytest.raises(ValueError):
            table.lookup(len(vocab))


class TestTableValidation:
    def test_nonzero_pad_rejected(self, vocab):
        matrix = np.ones((len(vocab), 4))
        with pytest.raises(ValueError):
            EmbeddingTable(matrix, vocab)

    def test_nan_rejected(self, vocab):
        matrix = np.zeros((len(vocab), 4))
        matrix[2, 1] = np.nan
        with pytest.raises(ValueError):
            EmbeddingTable(matrix, vocab)


class TestTextRoundTrip:
    def test_save_load_exact(self, tmp_path, vocab):
        table = init_random(vocab, dim=6, seed=11)
        path = tmp_path / "table.txt"
        save_text(path, table)
        reloaded = load_text(path, vocab, dim=6)
        np.testing.assert_array_equal(table.matrix, reloaded.matrix)
