"""Keyword machinery: cluster-based expansion, TF-IDF ranking, masks, slots.

Expansion turns a small human-selected seed set into a larger keyword set
by adopting every cluster that contains at least one seed. Masks flag all
keyword positions of a document for the attention-regularized loss; slots
collect a document's keywords into a fixed-length embedding-index list for
the hybrid model's keyword branch.
"""

from __future__ import annotations

import hashlib
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .clustering import NOISE
from .corpus import PAD_INDEX, Corpus, Document, Vocabulary

logger = logging.getLogger(__name__)

PROVENANCE_CROWD = "crowd"
PROVENANCE_CLUSTER = "cluster"
PROVENANCE_TFIDF = "tfidf"


@dataclass(frozen=True)
class KeywordSets:
    """Seed keywords and their cluster expansion, with per-token provenance."""

    seeds: frozenset[str]
    expanded: frozenset[str]
    provenance: dict[str, str] = field(repr=False)

    def __post_init__(self):
        if not self.seeds <= self.expanded:
            raise ValueError("seed keywords must be contained in the expanded set")

    def __len__(self) -> int:
        return len(self.expanded)

    def sha256(self) -> str:
        """Content hash of the expanded set, for checkpoint provenance."""
        digest = hashlib.sha256()
        for token in sorted(self.expanded):
            digest.update(token.encode("utf-8"))
            digest.update(b"\n")
        return digest.hexdigest()


def expand_keywords(
    token_clusters: Mapping[str, int], seeds: Iterable[str]
) -> KeywordSets:
    """Expand seeds to the union of every cluster containing a seed.

    ``token_clusters`` maps each clusterable vocabulary token to its cluster
    id (NOISE = -1 allowed). Seeds that fell into noise are kept as
    singletons rather than discarded. An empty seed set yields an empty
    expansion with a warning, not an error.
    """
    seeds = set(seeds)
    unknown = seeds - token_clusters.keys()
    if unknown:
        raise ValueError(
            f"{len(unknown)} seed(s) not covered by the cluster assignment: "
            f"{sorted(unknown)[:5]}"
        )
    if not seeds:
        logger.warning("empty seed set: keyword expansion produces no keywords")
        return KeywordSets(frozenset(), frozenset(), {})
    seed_cluster_ids = {
        token_clusters[s] for s in seeds if token_clusters[s] != NOISE
    }
    expanded = {t for t, c in token_clusters.items() if c in seed_cluster_ids}
    expanded |= seeds
    provenance = {
        t: (PROVENANCE_CROWD if t in seeds else PROVENANCE_CLUSTER) for t in expanded
    }
    return KeywordSets(frozenset(seeds), frozenset(expanded), provenance)


def tfidf_keywords(corpus: Corpus, per_text: int = 10) -> dict[int, frozenset[str]]:
    """Top ``per_text`` tokens per document by tf*idf.

    tf is the raw in-document count, idf = ln(N / df), ties broken
    lexicographically. Documents with fewer distinct tokens return all of
    them. Keyed by document id.
    """
    if len(corpus) == 0:
        raise ValueError("corpus is empty")
    if per_text < 1:
        raise ValueError("per_text must be >= 1")
    n = len(corpus)
    df: Counter[str] = Counter()
    for doc in corpus:
        df.update(set(doc.tokens))
    idf = {t: math.log(n / c) for t, c in df.items()}
    result: dict[int, frozenset[str]] = {}
    for doc in corpus:
        tf = Counter(doc.tokens)
        ranked = sorted(tf, key=lambda t: (-(tf[t] * idf[t]), t))
        result[doc.id] = frozenset(ranked[:per_text])
    return result


def tfidf_keyword_sets(corpus: Corpus, per_text: int = 10) -> KeywordSets:
    """Union of per-document TF-IDF keywords as a KeywordSets artifact."""
    union: set[str] = set()
    for tokens in tfidf_keywords(corpus, per_text).values():
        union |= tokens
    return KeywordSets(
        frozenset(), frozenset(union), {t: PROVENANCE_TFIDF for t in union}
    )


def build_mask(doc: Document, keywords: Iterable[str]) -> np.ndarray:
    """Bit vector over token positions: 1 wherever the token is a keyword.

    Every occurrence is flagged, and the mask length equals the (already
    truncated) token count exactly.
    """
    keywords = keywords if isinstance(keywords, (set, frozenset)) else set(keywords)
    return np.fromiter(
        (1 if t in keywords else 0 for t in doc.tokens),
        dtype=np.int64,
        count=len(doc.tokens),
    )


def build_slots(
    doc: Document, keywords: Iterable[str], slot_count: int, vocab: Vocabulary
) -> np.ndarray:
    """Fixed-length list of the document's keyword vocabulary indices.

    Keywords are taken in order of first appearance, deduplicated,
    truncated to ``slot_count`` and PAD-filled. Keywords outside the
    vocabulary carry no embedding row and are skipped.
    """
    if slot_count < 1:
        raise ValueError("slot_count must be >= 1")
    keywords = keywords if isinstance(keywords, (set, frozenset)) else set(keywords)
    slots: list[int] = []
    seen: set[str] = set()
    for token in doc.tokens:
        if token in keywords and token not in seen and token in vocab:
            seen.add(token)
            slots.append(vocab.token_to_index[token])
            if len(slots) == slot_count:
                break
    while len(slots) < slot_count:
        slots.append(PAD_INDEX)
    return np.array(slots, dtype=np.int64)


def save_keywords(path, keyword_sets: KeywordSets) -> None:
    """Persist as ``token provenance`` lines, sorted for stable bytes."""
    with open(path, "w", encoding="utf-8") as fh:
        for token in sorted(keyword_sets.expanded):
            fh.write(f"{token} {keyword_sets.provenance[token]}\n")


def load_keywords(path) -> KeywordSets:
    provenance: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            token, prov = line.split(" ")
            provenance[token] = prov
    expanded = frozenset(provenance)
    seeds = frozenset(t for t, p in provenance.items() if p == PROVENANCE_CROWD)
    return KeywordSets(seeds, expanded, provenance)
