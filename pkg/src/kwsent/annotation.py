"""Local stand-in for a crowdsourcing platform.

Serves sampled texts to annotators, collects per-text keyword selections
(at least three per text), persists them append-only as JSON lines, and
accumulates the seed keyword set. Task handout uses leases so concurrent
annotators never hold the same open task; abandoned leases expire and the
task reopens. A simulated annotator covers headless runs.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from collections import Counter
from dataclasses import dataclass
from math import log
from typing import Callable, Iterable, Sequence

import numpy as np

from .corpus import Corpus, Document
from .exceptions import (
    AnnotationValidationError,
    DuplicateSubmissionError,
    ServiceStateError,
)
from .keywords import tfidf_keywords

logger = logging.getLogger(__name__)

MIN_KEYWORDS = 3
DEFAULT_LEASE_TTL = 600.0

STATUS_OPEN = "open"
STATUS_DONE = "done"


@dataclass(frozen=True)
class AnnotationTask:
    task_id: int
    doc_id: int
    tokens: tuple[str, ...]
    status: str = STATUS_OPEN


@dataclass(frozen=True)
class AnnotationRecord:
    """One annotator's keyword choices for one sampled text."""

    task_id: int
    doc_id: int
    positions: tuple[int, ...]
    tokens: tuple[str, ...]
    annotator: str
    ts: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "task_id": self.task_id,
                "doc_id": self.doc_id,
                "positions": list(self.positions),
                "tokens": list(self.tokens),
                "annotator": self.annotator,
                "ts": self.ts,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> "AnnotationRecord":
        data = json.loads(line)
        return cls(
            task_id=int(data["task_id"]),
            doc_id=int(data["doc_id"]),
            positions=tuple(int(p) for p in data["positions"]),
            tokens=tuple(data["tokens"]),
            annotator=str(data["annotator"]),
            ts=float(data["ts"]),
        )


class AnnotationService:
    """Task queue with lease semantics and append-only persistence.

    Tasks are created one per sampled document, ordered by document id.
    State transitions (open -> leased -> done) are atomic under a lock, so
    the service may be driven by concurrent HTTP workers.
    """

    def __init__(
        self,
        documents: Sequence[Document],
        log_path=None,
        lease_ttl: float = DEFAULT_LEASE_TTL,
        clock: Callable[[], float] = time.time,
    ):
        if not documents:
            raise ServiceStateError("annotation service initialized without documents")
        ordered = sorted(documents, key=lambda d: d.id)
        self._tasks = {
            task_id: AnnotationTask(task_id, doc.id, doc.tokens)
            for task_id, doc in enumerate(ordered)
        }
        self._done: set[int] = set()
        self._leases: dict[int, tuple[str, float]] = {}
        self._served: dict[str, set[int]] = {}
        self._records: list[AnnotationRecord] = []
        self._seeds: set[str] = set()
        self._lock = threading.Lock()
        self._clock = clock
        self._lease_ttl = lease_ttl
        self._log_path = log_path

    # ------------------------------------------------------------------
    # task handout

    def next_task(self, annotator: str) -> AnnotationTask | None:
        """Lease an open task to ``annotator``; None when nothing is available.

        A task currently leased to someone else is unavailable until the
        lease expires; a task this annotator has already seen is only
        re-served when no fresh task remains.
        """
        now = self._clock()
        with self._lock:
            fresh = None
            retry = None
            for task_id in sorted(self._tasks):
                if task_id in self._done:
                    continue
                lease = self._leases.get(task_id)
                if lease is not None and lease[1] > now and lease[0] != annotator:
                    continue
                if task_id in self._served.get(annotator, set()):
                    if retry is None and (lease is None or lease[1] <= now):
                        retry = task_id
                    continue
                fresh = task_id
                break
            chosen = fresh if fresh is not None else retry
            if chosen is None:
                return None
            self._leases[chosen] = (annotator, now + self._lease_ttl)
            self._served.setdefault(annotator, set()).add(chosen)
            return self._tasks[chosen]

    # ------------------------------------------------------------------
    # submissions

    def submit(
        self,
        task_id: int,
        annotator: str,
        positions: Iterable[int],
        minimum: int = MIN_KEYWORDS,
    ) -> AnnotationRecord:
        """Validate and persist a keyword selection; marks the task done.

        Raises AnnotationValidationError for too few or out-of-range
        positions and DuplicateSubmissionError when the task is already done.
        """
        positions = tuple(dict.fromkeys(int(p) for p in positions))
        with self._lock:
            task = self._tasks.get(task_id)
            if task is None:
                raise AnnotationValidationError(f"unknown task id {task_id}")
            if task_id in self._done:
                raise DuplicateSubmissionError(f"task {task_id} already completed")
            if len(positions) < minimum:
                raise AnnotationValidationError(
                    f"at least {minimum} distinct keyword positions required, "
                    f"got {len(positions)}"
                )
            for p in positions:
                if not (0 <= p < len(task.tokens)):
                    raise AnnotationValidationError(
                        f"position {p} outside document of length {len(task.tokens)}"
                    )
            record = AnnotationRecord(
                task_id=task_id,
                doc_id=task.doc_id,
                positions=positions,
                tokens=tuple(task.tokens[p] for p in positions),
                annotator=annotator,
                ts=self._clock(),
            )
            if self._log_path is not None:
                with open(self._log_path, "a", encoding="utf-8") as fh:
                    fh.write(record.to_json() + "\n")
            self._records.append(record)
            self._done.add(task_id)
            self._leases.pop(task_id, None)
            self._seeds.update(record.tokens)
            return record

    # ------------------------------------------------------------------
    # inspection

    def progress(self) -> tuple[int, int]:
        with self._lock:
            return len(self._tasks), len(self._done)

    def task(self, task_id: int) -> AnnotationTask:
        task = self._tasks[task_id]
        if task_id in self._done:
            return AnnotationTask(task.task_id, task.doc_id, task.tokens, STATUS_DONE)
        return task

    @property
    def records(self) -> tuple[AnnotationRecord, ...]:
        with self._lock:
            return tuple(self._records)

    @property
    def seed_tokens(self) -> frozenset[str]:
        with self._lock:
            return frozenset(self._seeds)

    # ------------------------------------------------------------------
    # persistence

    @classmethod
    def replay(
        cls,
        documents: Sequence[Document],
        log_path,
        lease_ttl: float = DEFAULT_LEASE_TTL,
        clock: Callable[[], float] = time.time,
    ) -> "AnnotationService":
        """Rebuild service state by re-applying a record log (read-only)."""
        service = cls(documents, log_path=None, lease_ttl=lease_ttl, clock=clock)
        for record in load_records(log_path):
            service.submit(
                record.task_id,
                record.annotator,
                record.positions,
                minimum=min(MIN_KEYWORDS, len(record.positions)),
            )
        service._log_path = log_path
        return service


def load_records(log_path) -> list[AnnotationRecord]:
    records = []
    with open(log_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(AnnotationRecord.from_json(line))
    return records


def seed_tokens_from_records(records: Iterable[AnnotationRecord]) -> frozenset[str]:
    """Union of all selected tokens across records."""
    seeds: set[str] = set()
    for record in records:
        seeds.update(record.tokens)
    return frozenset(seeds)


# ----------------------------------------------------------------------
# simulated annotators

ORACLE_TFIDF = "tfidf"
ORACLE_LABEL = "label"


def _label_correlation_scores(
    documents: Sequence[Document], num_classes: int
) -> dict[int, dict[str, float]]:
    """Per-class token score: smoothed log-odds of appearing in that class."""
    class_docs = Counter(doc.label for doc in documents)
    token_class = {c: Counter() for c in range(num_classes)}
    for doc in documents:
        token_class[doc.label].update(set(doc.tokens))
    total_docs = len(documents)
    scores: dict[int, dict[str, float]] = {}
    all_tokens = set()
    for counter in token_class.values():
        all_tokens |= counter.keys()
    for c in range(num_classes):
        in_class = class_docs[c]
        out_class = total_docs - in_class
        scores[c] = {}
        for token in all_tokens:
            inside = token_class[c][token]
            outside = sum(token_class[k][token] for k in range(num_classes)) - inside
            scores[c][token] = log((inside + 1.0) / (in_class + 2.0)) - log(
                (outside + 1.0) / (out_class + 2.0)
            )
    return scores


def simulate_annotator(
    sample: Corpus | Sequence[Document],
    oracle: str = ORACLE_TFIDF,
    seed: int = 0,
    per_doc: int = MIN_KEYWORDS,
    num_classes: int | None = None,
) -> list[AnnotationRecord]:
    """Produce keyword selections for every sampled document, headlessly.

    The tfidf oracle selects each document's top tokens by tf*idf over the
    sample; the label oracle selects the tokens most correlated with the
    document's own label (ties broken by a seeded shuffle). Documents with
    fewer distinct tokens than requested yield all of them with a warning.
    Output is deterministic per seed.
    """
    if isinstance(sample, Corpus):
        documents = list(sample.documents)
        n_classes = sample.num_classes
    else:
        documents = sorted(sample, key=lambda d: d.id)
        if num_classes is None:
            n_classes = max(d.label for d in documents) + 1
        else:
            n_classes = num_classes
    if not documents:
        raise ValueError("cannot simulate annotations for an empty sample")
    if per_doc < 1:
        raise ValueError("per_doc must be >= 1")
    documents = sorted(documents, key=lambda d: d.id)
    rng = np.random.default_rng(seed)
    annotator = f"sim:{oracle}:{seed}"

    if oracle == ORACLE_TFIDF:
        mini = Corpus(tuple(documents), num_classes=n_classes, split="sample")
        chosen_per_doc = tfidf_keywords(mini, per_text=per_doc)
    elif oracle == ORACLE_LABEL:
        scores = _label_correlation_scores(documents, n_classes)
        chosen_per_doc = {}
        for doc in documents:
            distinct = sorted(set(doc.tokens))
            tie_break = {t: r for t, r in zip(distinct, rng.permutation(len(distinct)))}
            ranked = sorted(
                distinct, key=lambda t: (-scores[doc.label][t], tie_break[t])
            )
            chosen_per_doc[doc.id] = ranked[:per_doc]
    else:
        raise ValueError(f"unknown annotator oracle {oracle!r}")

    records = []
    for task_id, doc in enumerate(documents):
        chosen = sorted(chosen_per_doc[doc.id]) if oracle == ORACLE_TFIDF else list(chosen_per_doc[doc.id])
        if len(chosen) < per_doc:
            logger.warning(
                "document %d has only %d distinct tokens (< %d requested)",
                doc.id,
                len(set(doc.tokens)),
                per_doc,
            )
        first_position = {}
        for pos, token in enumerate(doc.tokens):
            if token not in first_position:
                first_position[token] = pos
        positions = tuple(sorted(first_position[t] for t in chosen))
        records.append(
            AnnotationRecord(
                task_id=task_id,
                doc_id=doc.id,
                positions=positions,
                tokens=tuple(doc.tokens[p] for p in positions),
                annotator=annotator,
                ts=float(task_id),
            )
        )
    return records


def apply_records(service: AnnotationService, records: Iterable[AnnotationRecord]) -> None:
    """Submit simulated records through the service's validation path."""
    for record in records:
        service.submit(
            record.task_id,
            record.annotator,
            record.positions,
            minimum=min(MIN_KEYWORDS, len(record.positions)),
        )
