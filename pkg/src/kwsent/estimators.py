"""Scikit-learn style classifiers over raw texts.

These wrap the training engine behind fit/predict/predict_proba so the
models compose with the wider ecosystem (pipelines, grid search,
cross-validation). X is a sequence of strings; labels may be arbitrary
hashables and are mapped through ``classes_``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from . import models, trainer
from .corpus import Corpus, Document, build_vocab, tokenize
from .embeddings import init_random


class _TextClassifierBase(BaseEstimator, ClassifierMixin):
    def _encode_corpus(self, X, y) -> Corpus:
        if len(X) != len(y):
            raise ValueError("X and y must have equal length")
        self.classes_, y_indices = np.unique(np.asarray(y), return_inverse=True)
        documents = []
        for i, text in enumerate(X):
            tokens = tokenize(text)[: self.max_len]
            if not tokens:
                raise ValueError(f"sample {i} is empty after tokenization")
            documents.append(Document(id=i, label=int(y_indices[i]), tokens=tuple(tokens)))
        return Corpus(tuple(documents), num_classes=len(self.classes_))

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("call fit before predict")

    def _encode_tokens(self, text: str) -> np.ndarray:
        tokens = tokenize(text)[: self.max_len]
        if not tokens:
            raise ValueError("text is empty after tokenization")
        return self.vocab_.encode(tokens), tokens

    def _keyword_context(self) -> trainer.KeywordContext:
        if not self.keywords:
            return trainer.KeywordContext()
        return trainer.KeywordContext(kind="global", tokens=frozenset(self.keywords))


class KeywordAttentionClassifier(_TextClassifierBase):
    """GRU + attention text classifier with keyword-amplified training loss.

    ``keywords`` is an optional token set; occurrences in a training text are
    rewarded with ``penalty`` times their attention mass. Without keywords
    the loss is plain cross-entropy.
    """

    def __init__(
        self,
        keywords=None,
        penalty: float = 0.1,
        embedding_dim: int = 32,
        hidden_size: int = 32,
        attention_size: int = 32,
        epochs: int = 5,
        batch_size: int = 32,
        learning_rate: float = 1e-3,
        optimizer: str = "adam",
        min_freq: int = 1,
        max_len: int = 256,
        seed: int = 0,
    ):
        self.keywords = keywords
        self.penalty = penalty
        self.embedding_dim = embedding_dim
        self.hidden_size = hidden_size
        self.attention_size = attention_size
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.min_freq = min_freq
        self.max_len = max_len
        self.seed = seed

    def fit(self, X, y):
        corpus = self._encode_corpus(X, y)
        self.vocab_ = build_vocab(corpus, min_freq=self.min_freq)
        self.embeddings_ = init_random(self.vocab_, self.embedding_dim, self.seed)
        config = trainer.TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            optimizer=self.optimizer,
            penalty=self.penalty,
            seed=self.seed,
            variant=models.VARIANT_KARNN,
            hidden_size=self.hidden_size,
            attention_size=self.attention_size,
        )
        self.params_, self.report_ = trainer.train(
            corpus, None, self.vocab_, self.embeddings_, self._keyword_context(), config
        )
        return self

    def predict_proba(self, X):
        self._check_fitted()
        emb = models.embedding_tensor(self.embeddings_.matrix)
        rows = []
        for text in X:
            token_ids, _ = self._encode_tokens(text)
            probs, _ = models.karnn_forward(token_ids, emb, self.params_)
            rows.append(probs)
        return np.array(rows)

    def predict(self, X):
        probs = self.predict_proba(X)
        return self.classes_[np.argmax(probs, axis=1)]

    def attention_weights(self, text: str) -> np.ndarray:
        """Per-token attention of a fitted model (diagnostic)."""
        self._check_fitted()
        emb = models.embedding_tensor(self.embeddings_.matrix)
        token_ids, _ = self._encode_tokens(text)
        _, alpha = models.karnn_forward(token_ids, emb, self.params_)
        return alpha


class HybridKeywordClassifier(_TextClassifierBase):
    """Text branch (convolution or GRU) fused with a keyword-slot branch.

    ``variant`` selects the text branch: "cnn" (w-gram convolution +
    max-pool) or "gru" (final recurrent state). Keywords found in a text
    fill up to ``slot_count`` embedding slots for the keyword branch.
    """

    def __init__(
        self,
        keywords=None,
        variant: str = "gru",
        slot_count: int = 10,
        embedding_dim: int = 32,
        hidden_size: int = 32,
        filter_width: int = 3,
        conv_channels: int = 32,
        fusion_dim: int = 32,
        epochs: int = 5,
        batch_size: int = 32,
        learning_rate: float = 1e-3,
        optimizer: str = "adam",
        min_freq: int = 1,
        max_len: int = 256,
        seed: int = 0,
    ):
        self.keywords = keywords
        self.variant = variant
        self.slot_count = slot_count
        self.embedding_dim = embedding_dim
        self.hidden_size = hidden_size
        self.filter_width = filter_width
        self.conv_channels = conv_channels
        self.fusion_dim = fusion_dim
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.min_freq = min_freq
        self.max_len = max_len
        self.seed = seed

    def _variant_tag(self) -> str:
        if self.variant == "cnn":
            return models.VARIANT_HDNN_C
        if self.variant == "gru":
            return models.VARIANT_HDNN_R
        raise ValueError(f"variant must be 'cnn' or 'gru', got {self.variant!r}")

    def fit(self, X, y):
        corpus = self._encode_corpus(X, y)
        self.vocab_ = build_vocab(corpus, min_freq=self.min_freq)
        self.embeddings_ = init_random(self.vocab_, self.embedding_dim, self.seed)
        config = trainer.TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            optimizer=self.optimizer,
            seed=self.seed,
            variant=self._variant_tag(),
            hidden_size=self.hidden_size,
            filter_width=self.filter_width,
            conv_channels=self.conv_channels,
            slot_count=self.slot_count,
            fusion_dim=self.fusion_dim,
        )
        self.params_, self.report_ = trainer.train(
            corpus, None, self.vocab_, self.embeddings_, self._keyword_context(), config
        )
        return self

    def predict_proba(self, X):
        self._check_fitted()
        from .keywords import build_slots

        emb = models.embedding_tensor(self.embeddings_.matrix)
        keywords = frozenset(self.keywords) if self.keywords else frozenset()
        rows = []
        for i, text in enumerate(X):
            token_ids, tokens = self._encode_tokens(text)
            doc = Document(id=i, label=0, tokens=tuple(tokens))
            slots = build_slots(doc, keywords, self.slot_count, self.vocab_)
            rows.append(models.hdnn_forward(token_ids, slots, emb, self.params_))
        return np.array(rows)

    def predict(self, X):
        probs = self.predict_proba(X)
        return self.classes_[np.argmax(probs, axis=1)]
