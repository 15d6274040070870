"""Keyword-guided neural text sentiment classification.

A pipeline in three stages: collect keywords on a sampled corpus (human
annotators over HTTP, or a simulated oracle), expand them through clusters
of the word-embedding space, and train classifiers that consume the
keywords either through an attention-regularized loss (KA-RNN) or through
a dedicated keyword branch fused with the text branch (HDNN).
"""

from .clustering import DBSCAN, ClusterAssignment, ClusterConfig, KMeans, MeanShift
from .clustering import dbscan, kmeans, mean_shift
from .corpus import (
    Corpus,
    Document,
    Vocabulary,
    build_vocab,
    load_corpus,
    sample_corpus,
    tokenize,
)
from .embeddings import EmbeddingTable, init_random, load_pretrained
from .estimators import HybridKeywordClassifier, KeywordAttentionClassifier
from .keywords import (
    KeywordSets,
    build_mask,
    build_slots,
    expand_keywords,
    tfidf_keywords,
)
from .models import HdnnParams, KarnnParams, hdnn_forward, karnn_forward, predict
from .trainer import KeywordContext, TrainConfig, TrainReport, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "ClusterAssignment",
    "ClusterConfig",
    "Corpus",
    "DBSCAN",
    "Document",
    "EmbeddingTable",
    "HdnnParams",
    "HybridKeywordClassifier",
    "KMeans",
    "KarnnParams",
    "KeywordAttentionClassifier",
    "KeywordContext",
    "KeywordSets",
    "MeanShift",
    "TrainConfig",
    "TrainReport",
    "Vocabulary",
    "build_mask",
    "build_slots",
    "build_vocab",
    "dbscan",
    "evaluate",
    "expand_keywords",
    "hdnn_forward",
    "init_random",
    "karnn_forward",
    "kmeans",
    "load_corpus",
    "load_pretrained",
    "mean_shift",
    "predict",
    "sample_corpus",
    "tfidf_keywords",
    "tokenize",
    "train",
]
