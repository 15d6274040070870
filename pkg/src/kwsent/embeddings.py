"""Word embedding tables: pretrained loading and random initialization.

The table is the geometric space in which keyword clustering operates and
the input space of every neural model, so rows are validated to be finite
and the PAD row is pinned to zero.
"""

from __future__ import annotations

import logging

import numpy as np

from .corpus import PAD_INDEX, UNK_INDEX, Vocabulary
from .exceptions import EmbeddingFormatError

logger = logging.getLogger(__name__)

OOV_INIT_LOW = -0.05
OOV_INIT_HIGH = 0.05


class EmbeddingTable:
    """Vocabulary-indexed dense word vectors.

    Attributes:
        matrix: (|vocab|, dim) float64 array. Row 0 (PAD) is all zeros.
        vocab: the Vocabulary the rows are indexed by.
        coverage: fraction of regular vocab tokens found in a pretrained
            file, or None for randomly initialized tables.
    """

    def __init__(self, matrix: np.ndarray, vocab: Vocabulary, coverage: float | None = None):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValueError("embedding matrix must be 2-D")
        if matrix.shape[0] != len(vocab):
            raise ValueError(
                f"matrix has {matrix.shape[0]} rows but vocabulary has {len(vocab)} entries"
            )
        if matrix.shape[1] < 2:
            raise ValueError(f"embedding dim must be >= 2, got {matrix.shape[1]}")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("embedding matrix contains NaN or infinite values")
        if np.any(matrix[PAD_INDEX] != 0.0):
            raise ValueError("PAD row must be all zeros")
        self.matrix = matrix
        self.vocab = vocab
        self.coverage = coverage

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def lookup(self, index: int) -> np.ndarray:
        """Return the stored row for a vocabulary index."""
        if not (0 <= index < len(self)):
            raise ValueError(f"index {index} out of range [0, {len(self)})")
        return self.matrix[index]

    def rows_for_tokens(self, tokens) -> np.ndarray:
        return self.matrix[[self.vocab.token_to_index[t] for t in tokens]]


def init_random(vocab: Vocabulary, dim: int, seed: int) -> EmbeddingTable:
    """Initialize all rows i.i.d. uniform(-0.05, 0.05); PAD stays zero."""
    if dim < 2:
        raise ValueError(f"embedding dim must be >= 2, got {dim}")
    rng = np.random.default_rng(seed)
    matrix = rng.uniform(OOV_INIT_LOW, OOV_INIT_HIGH, size=(len(vocab), dim))
    matrix[PAD_INDEX] = 0.0
    return EmbeddingTable(matrix, vocab)


def load_pretrained(
    path, vocab: Vocabulary, dim: int, oov_seed: int = 0
) -> EmbeddingTable:
    """Load a text embedding file (``token v1 ... vd`` per line).

    Vocab tokens found in the file receive the file vector; missing tokens
    (including UNK) get a seeded uniform(-0.05, 0.05) row, so the result is
    deterministic regardless of file ordering. The coverage fraction over
    regular vocab tokens is logged and stored on the table.

    Raises:
        EmbeddingFormatError: a line whose value count differs from ``dim``,
            reported with its line number.
    """
    if dim < 2:
        raise ValueError(f"embedding dim must be >= 2, got {dim}")
    rng = np.random.default_rng(oov_seed)
    matrix = rng.uniform(OOV_INIT_LOW, OOV_INIT_HIGH, size=(len(vocab), dim))
    found = np.zeros(len(vocab), dtype=bool)
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(" ")
            token, values = parts[0], parts[1:]
            if len(values) != dim:
                raise EmbeddingFormatError(
                    f"expected {dim} values for token {token!r}, got {len(values)}",
                    line=line_no,
                )
            index = vocab.token_to_index.get(token)
            if index is None or index in (PAD_INDEX, UNK_INDEX):
                continue
            try:
                matrix[index] = np.array(values, dtype=np.float64)
            except ValueError:
                raise EmbeddingFormatError(
                    f"non-numeric value for token {token!r}", line=line_no
                ) from None
            found[index] = True
    matrix[PAD_INDEX] = 0.0
    n_regular = max(1, len(vocab) - 2)
    coverage = float(found[2:].sum()) / n_regular
    logger.info(
        "pretrained embeddings: %d/%d vocab tokens covered (%.1f%%)",
        int(found[2:].sum()),
        n_regular,
        100.0 * coverage,
    )
    return EmbeddingTable(matrix, vocab, coverage=coverage)


def save_text(path, table: EmbeddingTable) -> None:
    """Write a table in the text format accepted by load_pretrained.

    PAD/UNK rows are written too (under their reserved token names) so a
    round trip reproduces the table exactly.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for index, token in enumerate(table.vocab.index_to_token):
            values = " ".join(repr(float(v)) for v in table.matrix[index])
            fh.write(f"{token} {values}\n")


def load_text(path, vocab: Vocabulary, dim: int) -> EmbeddingTable:
    """Reload a table written by save_text (exact round trip, UNK included)."""
    matrix = np.zeros((len(vocab), dim))
    seen = np.zeros(len(vocab), dtype=bool)
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(" ")
            token, values = parts[0], parts[1:]
            if len(values) != dim:
                raise EmbeddingFormatError(
                    f"expected {dim} values for token {token!r}, got {len(values)}",
                    line=line_no,
                )
            index = vocab.token_to_index.get(token)
            if index is None:
                continue
            matrix[index] = np.array(values, dtype=np.float64)
            seen[index] = True
    if not seen[2:].all():
        missing = int((~seen[2:]).sum())
        raise EmbeddingFormatError(f"{missing} vocabulary tokens missing from {path}")
    matrix[PAD_INDEX] = 0.0
    return EmbeddingTable(matrix, vocab)
