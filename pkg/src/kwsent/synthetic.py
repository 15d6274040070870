"""Synthetic corpora with a known keyword ground truth.

Each document carries exactly one signal token whose class determines the
true label, surrounded by filler tokens. Optional decoy tokens correlate
perfectly with the (possibly noise-flipped) training label but are random
at test time, so a model that shortcuts onto them loses test accuracy while
a model guided onto the signal tokens does not. Embeddings can be planted
so that the signal tokens of one class form a tight cluster, which lets the
cluster-based keyword expansion recover a full signal set from a few seeds.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Document, Vocabulary
from .embeddings import EmbeddingTable


@dataclass(frozen=True)
class SyntheticCorpus:
    train: Corpus
    test: Corpus
    signal_tokens: tuple[frozenset[str], ...]  # per class
    decoy_tokens: tuple[frozenset[str], ...]  # per class (empty when unused)

    @property
    def all_signal(self) -> frozenset[str]:
        out: set[str] = set()
        for tokens in self.signal_tokens:
            out |= tokens
        return frozenset(out)


def make_keyword_corpus(
    n_train: int,
    n_test: int,
    num_classes: int = 2,
    signal_per_class: int = 20,
    n_fillers: int = 120,
    doc_len: tuple[int, int] = (8, 12),
    label_noise: float = 0.0,
    with_decoys: bool = False,
    decoys_per_class: int = 6,
    seed: int = 0,
) -> SyntheticCorpus:
    """Build train/test corpora where one token per document fixes the label.

    ``label_noise`` flips that fraction of training labels to a different
    class; test labels are always clean. With ``with_decoys`` every training
    document also contains a decoy token drawn from the decoy set of its
    observed (post-noise) label, while test documents draw decoys uniformly.
    """
    rng = np.random.default_rng(seed)
    signal = tuple(
        frozenset(f"sig{c}w{i}" for i in range(signal_per_class))
        for c in range(num_classes)
    )
    decoys = tuple(
        frozenset(f"dec{c}w{i}" for i in range(decoys_per_class)) if with_decoys else frozenset()
        for c in range(num_classes)
    )
    signal_lists = [sorted(s) for s in signal]
    decoy_lists = [sorted(d) for d in decoys]
    fillers = [f"fill{i}" for i in range(n_fillers)]

    def make_doc(doc_id: int, is_train: bool) -> Document:
        true_class = int(rng.integers(num_classes))
        label = true_class
        if is_train and label_noise > 0.0 and rng.random() < label_noise:
            shift = int(rng.integers(1, num_classes))
            label = (true_class + shift) % num_classes
        length = int(rng.integers(doc_len[0], doc_len[1] + 1))
        tokens = [fillers[int(rng.integers(n_fillers))] for _ in range(length)]
        sig_token = signal_lists[true_class][int(rng.integers(signal_per_class))]
        positions = list(rng.choice(length, size=(2 if with_decoys else 1), replace=False))
        tokens[positions[0]] = sig_token
        if with_decoys:
            decoy_class = label if is_train else int(rng.integers(num_classes))
            decoy_token = decoy_lists[decoy_class][int(rng.integers(decoys_per_class))]
            tokens[positions[1]] = decoy_token
        return Document(id=doc_id, label=label, tokens=tuple(tokens))

    train_docs = tuple(make_doc(i, True) for i in range(n_train))
    test_docs = tuple(make_doc(i, False) for i in range(n_test))
    return SyntheticCorpus(
        train=Corpus(train_docs, num_classes=num_classes, split="train"),
        test=Corpus(test_docs, num_classes=num_classes, split="test"),
        signal_tokens=signal,
        decoy_tokens=decoys,
    )


def make_planted_embeddings(
    vocab: Vocabulary,
    signal_tokens: tuple[frozenset[str], ...],
    dim: int,
    seed: int = 0,
    cluster_spread: float = 0.02,
    center_scale: float = 1.0,
) -> EmbeddingTable:
    """Embeddings where each class's signal tokens form one tight cluster.

    Signal tokens sit at ``center_c + noise`` for well-separated class
    centers; all other tokens are scattered uniformly, far relative to the
    cluster spread.
    """
    rng = np.random.default_rng(seed)
    matrix = rng.uniform(-center_scale, center_scale, size=(len(vocab), dim))
    centers = rng.normal(scale=3.0 * center_scale, size=(len(signal_tokens), dim))
    for class_index, tokens in enumerate(signal_tokens):
        for token in sorted(tokens):
            if token in vocab:
                row = vocab.token_to_index[token]
                matrix[row] = centers[class_index] + rng.normal(
                    scale=cluster_spread, size=dim
                )
    matrix[vocab.pad_index] = 0.0
    return EmbeddingTable(matrix, vocab)


def write_corpus_csv(path, corpus: Corpus) -> None:
    """Write a corpus in the 1-based-class CSV layout load_corpus reads."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_ALL)
        for doc in corpus:
            writer.writerow([doc.label + 1, " ".join(doc.tokens)])
