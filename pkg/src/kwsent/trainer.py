"""Mini-batch training, evaluation, and reporting for all model variants.

Runs are deterministic for a fixed config: parameter init, per-epoch
shuffling, and gradient accumulation all derive from the config seed and a
fixed iteration order.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np

from . import autodiff as ad
from . import models
from .autodiff import Tensor
from .corpus import PAD_INDEX, Corpus, Document, Vocabulary
from .embeddings import EmbeddingTable
from .exceptions import NonFiniteError, TrainingDiverged
from .keywords import build_mask, build_slots

logger = logging.getLogger(__name__)

ABLATION_FULL = "full"
ABLATION_NO_KEYWORDS = "N"
ABLATION_TFIDF = "T"
ABLATION_NO_CLUSTERING = "NC"
ABLATIONS = (ABLATION_FULL, ABLATION_NO_KEYWORDS, ABLATION_TFIDF, ABLATION_NO_CLUSTERING)

# Published full-scale accuracy figures for the two strongest settings;
# desk-scale runs are not expected to reach them (non-binding references).
REFERENCE_ACCURACY = {
    ("karnn", "yelp_polarity"): 0.9647,
    ("hdnn_r", "ag_news"): 0.9329,
}


@dataclass(frozen=True)
class KeywordContext:
    """Keywords available to training: a global set or per-document sets."""

    kind: str = "none"  # none | global | per_doc
    tokens: frozenset[str] = frozenset()
    per_doc: dict[int, frozenset[str]] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("none", "global", "per_doc"):
            raise ValueError(f"unknown keyword context kind {self.kind!r}")

    def for_doc(self, doc_id: int) -> frozenset[str]:
        if self.kind == "none":
            return frozenset()
        if self.kind == "global":
            return self.tokens
        return self.per_doc.get(doc_id, frozenset())

    def union(self) -> frozenset[str]:
        if self.kind == "per_doc":
            out: set[str] = set()
            for tokens in self.per_doc.values():
                out |= tokens
            return frozenset(out)
        return self.tokens


@dataclass
class TrainConfig:
    """Optimization settings plus model hyperparameters for one run."""

    epochs: int = 5
    batch_size: int = 32
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    penalty: float = 0.1
    seed: int = 0
    patience: int = 2
    variant: str = models.VARIANT_KARNN
    ablation: str = ABLATION_FULL
    hidden_size: int = 128
    attention_size: int = 64
    filter_width: int = 3
    conv_channels: int = 128
    slot_count: int = 10
    fusion_dim: int = 64
    fine_tune_embeddings: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.variant not in models.VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.ablation not in ABLATIONS:
            raise ValueError(f"unknown ablation tag {self.ablation!r}")
        if self.penalty < 0:
            raise ValueError("penalty must be >= 0")


@dataclass
class TrainReport:
    """Per-epoch curves and the final outcome of one training run."""

    train_loss: list[float]
    test_accuracy: list[float]
    wall_time: float
    final_accuracy: float | None
    best_epoch: int
    config: dict

    def to_dict(self) -> dict:
        return {
            "train_loss": self.train_loss,
            "test_accuracy": self.test_accuracy,
            "wall_time": self.wall_time,
            "final_accuracy": self.final_accuracy,
            "best_epoch": self.best_epoch,
            "config": self.config,
        }


@dataclass(frozen=True)
class Instance:
    """One encoded training example."""

    doc_id: int
    token_ids: np.ndarray
    label: int
    mask: np.ndarray | None = None
    slots: np.ndarray | None = None


def build_instances(
    corpus: Corpus,
    vocab: Vocabulary,
    keywords: KeywordContext,
    config: TrainConfig,
) -> list[Instance]:
    """Encode documents and attach the keyword context the variant needs.

    Ablation "N" carries no keyword signal: masks are all zero and slots are
    all PAD regardless of the supplied context.
    """
    no_keywords = config.ablation == ABLATION_NO_KEYWORDS
    instances = []
    for doc in corpus:
        token_ids = vocab.encode(doc.tokens)
        doc_keywords = frozenset() if no_keywords else keywords.for_doc(doc.id)
        if config.variant == models.VARIANT_KARNN:
            mask = build_mask(doc, doc_keywords)
            instances.append(
                Instance(doc.id, token_ids, doc.label, mask=mask)
            )
        else:
            slots = build_slots(doc, doc_keywords, config.slot_count, vocab)
            instances.append(
                Instance(doc.id, token_ids, doc.label, slots=slots)
            )
    return instances


class AdamState:
    """First/second moment buffers keyed by parameter identity."""

    def __init__(self, params: Iterable[Tensor]):
        self.step = 0
        self.moments = {
            id(p): (np.zeros_like(p.value), np.zeros_like(p.value)) for p in params
        }


def adam_step(
    params: list[Tensor],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """Bias-corrected first/second-moment update. No-op where grads are zero."""
    state.step += 1
    t = state.step
    for p in params:
        if p.grad is None:
            continue
        m, v = state.moments[id(p)]
        m *= beta1
        m += (1.0 - beta1) * p.grad
        v *= beta2
        v += (1.0 - beta2) * p.grad * p.grad
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        p.value -= lr * m_hat / (np.sqrt(v_hat) + eps)


def sgd_step(params: list[Tensor], lr: float) -> None:
    for p in params:
        if p.grad is not None:
            p.value -= lr * p.grad


def _init_params(config: TrainConfig, input_dim: int, num_classes: int):
    penalty = 0.0 if config.ablation == ABLATION_NO_KEYWORDS else config.penalty
    if config.variant == models.VARIANT_KARNN:
        return models.KarnnParams.init(
            input_dim,
            config.hidden_size,
            config.attention_size,
            num_classes,
            penalty,
            config.seed,
        )
    variant = "c" if config.variant == models.VARIANT_HDNN_C else "r"
    return models.HdnnParams.init(
        variant,
        input_dim,
        num_classes,
        config.slot_count,
        hidden_dim=config.hidden_size,
        filter_width=config.filter_width,
        conv_channels=config.conv_channels,
        fusion_dim=config.fusion_dim,
        seed=config.seed,
    )


def _batch_loss(instances, emb, params) -> Tensor:
    if isinstance(params, models.KarnnParams):
        batch = [(i.token_ids, i.label, i.mask) for i in instances]
        return models.karnn_loss(batch, emb, params)
    batch = [(i.token_ids, i.label, i.slots) for i in instances]
    return models.hdnn_loss(batch, emb, params)


def evaluate_instances(params, instances: list[Instance], emb: Tensor) -> float:
    """Fraction of instances whose argmax prediction matches the label."""
    if not instances:
        raise ValueError("cannot evaluate on an empty split")
    correct = 0
    for inst in instances:
        predicted = models.predict(params, inst.token_ids, emb, slot_ids=inst.slots)
        correct += int(predicted == inst.label)
    return correct / len(instances)


def evaluate(
    params,
    corpus: Corpus,
    vocab: Vocabulary,
    embeddings: EmbeddingTable,
    keywords: KeywordContext | None = None,
    config: TrainConfig | None = None,
) -> float:
    """Accuracy of ``params`` on a corpus split."""
    if config is None:
        variant = (
            models.VARIANT_KARNN
            if isinstance(params, models.KarnnParams)
            else (models.VARIANT_HDNN_C if params.variant == "c" else models.VARIANT_HDNN_R)
        )
        slot_count = getattr(params, "slot_count", 10)
        config = TrainConfig(variant=variant, slot_count=slot_count)
    keywords = keywords or KeywordContext()
    emb = models.embedding_tensor(embeddings.matrix)
    instances = build_instances(corpus, vocab, keywords, config)
    return evaluate_instances(params, instances, emb)


def train(
    train_corpus: Corpus,
    test_corpus: Corpus | None,
    vocab: Vocabulary,
    embeddings: EmbeddingTable,
    keywords: KeywordContext,
    config: TrainConfig,
):
    """Train one model; returns (params, TrainReport).

    Behavior under a fixed (config, data) pair is bit-deterministic. The
    best-test-accuracy parameter snapshot is restored before returning. A
    non-finite loss aborts with TrainingDiverged naming epoch and batch.
    """
    start = time.perf_counter()
    params = _init_params(config, embeddings.dim, train_corpus.num_classes)
    emb = models.embedding_tensor(embeddings.matrix, trainable=config.fine_tune_embeddings)
    trainables = params.tensors() + ([emb] if config.fine_tune_embeddings else [])

    train_instances = build_instances(train_corpus, vocab, keywords, config)
    test_instances = (
        build_instances(test_corpus, vocab, keywords, config) if test_corpus else None
    )

    rng = np.random.default_rng(config.seed)
    state = AdamState(trainables) if config.optimizer == "adam" else None

    train_loss: list[float] = []
    test_accuracy: list[float] = []
    best_acc = -1.0
    best_epoch = 0
    best_snapshot = [t.value.copy() for t in trainables]
    epochs_without_improvement = 0

    n = len(train_instances)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for batch_index, start_idx in enumerate(range(0, n, config.batch_size)):
            batch = [train_instances[i] for i in order[start_idx : start_idx + config.batch_size]]
            for t in trainables:
                t.zero_grad()
            try:
                loss = _batch_loss(batch, emb, params)
                # Step on the per-document mean so lr does not scale with batch.
                ad.scale(loss, 1.0 / len(batch)).backward()
            except NonFiniteError as exc:
                raise TrainingDiverged(epoch, batch_index, str(exc)) from exc
            if config.fine_tune_embeddings and emb.grad is not None:
                emb.grad[PAD_INDEX, :] = 0.0
            if config.optimizer == "adam":
                adam_step(trainables, state, config.learning_rate)
            else:
                sgd_step(trainables, config.learning_rate)
            epoch_loss += float(loss.value)
        mean_loss = epoch_loss / n
        if not np.isfinite(mean_loss):
            raise TrainingDiverged(epoch, -1, "epoch loss is not finite")
        train_loss.append(mean_loss)

        if test_instances is not None:
            acc = evaluate_instances(params, test_instances, emb)
            test_accuracy.append(acc)
            if acc > best_acc:
                best_acc = acc
                best_epoch = epoch
                best_snapshot = [t.value.copy() for t in trainables]
                epochs_without_improvement = 0
            else:
                epochs_without_improvement += 1
                if epochs_without_improvement >= config.patience:
                    logger.info("early stop at epoch %d (patience %d)", epoch, config.patience)
                    break
        else:
            best_epoch = epoch
            best_snapshot = [t.value.copy() for t in trainables]

    for tensor, snapshot in zip(trainables, best_snapshot):
        tensor.value[...] = snapshot

    report = TrainReport(
        train_loss=train_loss,
        test_accuracy=test_accuracy,
        wall_time=time.perf_counter() - start,
        final_accuracy=(best_acc if test_instances is not None else None),
        best_epoch=best_epoch,
        config=asdict(config),
    )
    return params, report
