"""Dataset ingestion, tokenization, vocabulary construction, and sampling.

The supported input layout is the common review-classification CSV form:
comma-separated, double-quoted fields, first field a 1-based class index,
remaining fields text columns that are concatenated with a space.
"""

from __future__ import annotations

import csv
import math
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .exceptions import CorpusFormatError, CorpusValidationError
from .validation import check_fraction

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_INDEX = 0
UNK_INDEX = 1

DEFAULT_MIN_FREQ = 2
DEFAULT_MAX_LEN = 256

# Runs of letters/digits; underscores count as punctuation and are dropped.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace/punctuation, dropping the punctuation."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Document:
    """One classified text: a stable id, a 0-based label, and its tokens."""

    id: int
    label: int
    tokens: tuple[str, ...]

    def __post_init__(self):
        if not self.tokens:
            raise CorpusValidationError(f"document {self.id} has no tokens")


@dataclass(frozen=True)
class Corpus:
    """An ordered collection of documents with a shared label space."""

    documents: tuple[Document, ...]
    num_classes: int
    split: str = "train"

    def __post_init__(self):
        ids = [d.id for d in self.documents]
        if len(set(ids)) != len(ids):
            raise CorpusValidationError("document ids are not unique")
        for d in self.documents:
            if not (0 <= d.label < self.num_classes):
                raise CorpusValidationError(
                    f"document {d.id} has label {d.label} outside [0, {self.num_classes})"
                )

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    def by_id(self, doc_id: int) -> Document:
        if not hasattr(self, "_index"):
            object.__setattr__(self, "_index", {d.id: d for d in self.documents})
        return self._index[doc_id]


def load_corpus(
    path,
    num_classes: int,
    split: str = "train",
    max_len: int = DEFAULT_MAX_LEN,
    fmt: str = "csv",
) -> Corpus:
    """Load a CSV dataset into a Corpus.

    Rows are ``"<1-based class>","<title>","<body>"`` (one or more text
    columns). Labels are shifted to 0-based indices, text columns are joined
    with a space, and token sequences are truncated to ``max_len``.

    Raises:
        CorpusFormatError: malformed row (too few columns, non-integer class),
            with the offending line number.
        CorpusValidationError: class outside [1, num_classes], or a row whose
            text is empty after tokenization.
    """
    if fmt != "csv":
        raise ValueError(f"unsupported corpus format: {fmt!r}")
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    documents: list[Document] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for line_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) < 2:
                raise CorpusFormatError(
                    f"expected a class column and at least one text column, got {len(row)} fields",
                    line=line_no,
                )
            try:
                raw_class = int(row[0])
            except ValueError:
                raise CorpusFormatError(
                    f"class field {row[0]!r} is not an integer", line=line_no
                ) from None
            if not (1 <= raw_class <= num_classes):
                raise CorpusValidationError(
                    f"class {raw_class} outside declared range [1, {num_classes}]",
                    line=line_no,
                )
            tokens = tokenize(" ".join(row[1:]))
            if not tokens:
                raise CorpusValidationError(
                    "text is empty after tokenization", line=line_no
                )
            documents.append(
                Document(
                    id=len(documents),
                    label=raw_class - 1,
                    tokens=tuple(tokens[:max_len]),
                )
            )
    if not documents:
        raise CorpusValidationError(f"no documents found in {path}")
    return Corpus(tuple(documents), num_classes=num_classes, split=split)


def sample_corpus(corpus: Corpus, ratio: float, seed: int) -> set[int]:
    """Sample ceil(ratio * |corpus|) distinct document ids, uniformly.

    Identical (corpus, ratio, seed) always yields the identical id set.
    """
    check_fraction("ratio", ratio)
    n = len(corpus)
    exact = ratio * n
    # Snap float noise (e.g. 0.001 * 120000 = 120.00000000000001) before ceil.
    if abs(exact - round(exact)) < 1e-9:
        size = int(round(exact))
    else:
        size = int(math.ceil(exact))
    size = max(1, min(size, n))
    rng = np.random.default_rng(seed)
    ids = np.fromiter((d.id for d in corpus), dtype=np.int64, count=n)
    picked = rng.choice(ids, size=size, replace=False)
    return {int(i) for i in picked}


@dataclass(frozen=True)
class Vocabulary:
    """Bijective token/index mapping with reserved PAD=0 and UNK=1 entries."""

    index_to_token: tuple[str, ...]
    token_to_index: dict[str, int] = field(repr=False)

    pad_index = PAD_INDEX
    unk_index = UNK_INDEX

    def __post_init__(self):
        if self.index_to_token[:2] != (PAD_TOKEN, UNK_TOKEN):
            raise ValueError("vocabulary must reserve PAD=0 and UNK=1")

    def __len__(self) -> int:
        return len(self.index_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_index

    def index(self, token: str) -> int:
        """Index of ``token``, or the UNK index when out of vocabulary."""
        return self.token_to_index.get(token, UNK_INDEX)

    def token(self, index: int) -> str:
        return self.index_to_token[index]

    def encode(self, tokens) -> np.ndarray:
        """Map a token sequence to an int64 index array (unknowns to UNK)."""
        return np.fromiter(
            (self.token_to_index.get(t, UNK_INDEX) for t in tokens),
            dtype=np.int64,
            count=len(tokens),
        )

    @property
    def regular_tokens(self) -> tuple[str, ...]:
        """All tokens except the PAD/UNK reserved entries, in index order."""
        return self.index_to_token[2:]

    @classmethod
    def from_tokens(cls, tokens) -> "Vocabulary":
        index_to_token = (PAD_TOKEN, UNK_TOKEN, *tokens)
        token_to_index = {t: i for i, t in enumerate(index_to_token)}
        if len(token_to_index) != len(index_to_token):
            raise ValueError("duplicate tokens in vocabulary")
        return cls(index_to_token=index_to_token, token_to_index=token_to_index)


def build_vocab(corpus: Corpus, min_freq: int = DEFAULT_MIN_FREQ) -> Vocabulary:
    """Build a vocabulary from corpus tokens with frequency >= min_freq.

    Kept tokens are ordered by (frequency desc, token asc); everything else
    maps to UNK at encode time.
    """
    if len(corpus) == 0:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    counts = Counter()
    for doc in corpus:
        counts.update(doc.tokens)
    kept = sorted(
        (t for t, c in counts.items() if c >= min_freq),
        key=lambda t: (-counts[t], t),
    )
    return Vocabulary.from_tokens(kept)
