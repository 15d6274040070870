"""Three-stage pipeline orchestration with a hashed manifest.

The manifest is a JSON file living next to its stage artifacts. Every stage
records the content hashes of its inputs and outputs plus a hash of its
effective configuration; a stage re-runs only when any of those changed, so
re-running the pipeline with unchanged inputs is a no-op and any upstream
edit transparently invalidates everything downstream.

Stage order: ingest -> sample -> annotate -> cluster -> expand -> train -> eval.
The annotate stage is satisfied either by simulated annotators (headless)
or by a record log produced by the interactive annotation service.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import models, trainer
from .annotation import (
    AnnotationService,
    apply_records,
    load_records,
    seed_tokens_from_records,
    simulate_annotator,
)
from .clustering import NOISE, ClusterConfig, cluster_points
from .corpus import (
    DEFAULT_MAX_LEN,
    DEFAULT_MIN_FREQ,
    Corpus,
    Document,
    Vocabulary,
    build_vocab,
    load_corpus,
    sample_corpus,
)
from .embeddings import EmbeddingTable, init_random, load_pretrained, load_text, save_text
from .exceptions import StageDependencyError
from .keywords import (
    KeywordSets,
    expand_keywords,
    load_keywords,
    save_keywords,
    tfidf_keywords,
)
from .trainer import KeywordContext, TrainConfig

logger = logging.getLogger(__name__)

STAGE_INGEST = "ingest"
STAGE_SAMPLE = "sample"
STAGE_ANNOTATE = "annotate"
STAGE_CLUSTER = "cluster"
STAGE_EXPAND = "expand"
STAGE_TRAIN = "train"
STAGE_EVAL = "eval"

STAGE_ORDER = (
    STAGE_INGEST,
    STAGE_SAMPLE,
    STAGE_ANNOTATE,
    STAGE_CLUSTER,
    STAGE_EXPAND,
    STAGE_TRAIN,
    STAGE_EVAL,
)

UPSTREAM = {
    STAGE_INGEST: (),
    STAGE_SAMPLE: (STAGE_INGEST,),
    STAGE_ANNOTATE: (STAGE_SAMPLE,),
    STAGE_CLUSTER: (STAGE_INGEST,),
    STAGE_EXPAND: (STAGE_ANNOTATE, STAGE_CLUSTER),
    STAGE_TRAIN: (STAGE_INGEST,),
    STAGE_EVAL: (STAGE_TRAIN,),
}

# Extra train-stage dependencies by ablation tag.
TRAIN_KEYWORD_DEPS = {
    trainer.ABLATION_FULL: (STAGE_EXPAND,),
    trainer.ABLATION_NO_CLUSTERING: (STAGE_ANNOTATE,),
    trainer.ABLATION_TFIDF: (),
    trainer.ABLATION_NO_KEYWORDS: (),
}


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def config_sha256(config: dict) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True, default=str).encode()
    ).hexdigest()


class Manifest:
    """Pipeline state: global config, per-stage artifact and input hashes."""

    def __init__(self, path):
        self.path = Path(path)
        if self.path.exists():
            data = json.loads(self.path.read_text())
        else:
            data = {"version": 1, "config": {}, "stages": {}}
        self.data = data

    @property
    def workdir(self) -> Path:
        return self.path.parent

    @property
    def config(self) -> dict:
        return self.data["config"]

    def save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(self.data, indent=2, sort_keys=True) + "\n")

    def artifact(self, name: str) -> Path:
        return self.workdir / name

    def stage(self, name: str) -> dict | None:
        return self.data["stages"].get(name)

    def stage_done(self, name: str) -> bool:
        """A stage counts as done when its recorded artifacts still match."""
        record = self.stage(name)
        if record is None:
            return False
        for artifact, digest in record["artifacts"].items():
            path = self.artifact(artifact)
            if not path.exists() or file_sha256(path) != digest:
                return False
        return True

    def record_stage(self, name: str, artifacts: list[str], config: dict,
                     inputs: dict[str, str]) -> None:
        self.data["stages"][name] = {
            "artifacts": {a: file_sha256(self.artifact(a)) for a in artifacts},
            "config_hash": config_sha256(config),
            "inputs": inputs,
        }
        self.save()

    def stage_current(self, name: str, config: dict, inputs: dict[str, str]) -> bool:
        """True when the stage ran with this config on these exact inputs."""
        record = self.stage(name)
        if record is None or not self.stage_done(name):
            return False
        return (
            record["config_hash"] == config_sha256(config)
            and record["inputs"] == inputs
        )


def _require_upstream(manifest: Manifest, stage: str, deps) -> dict[str, str]:
    """Verify upstream stages are complete; return their artifact hashes."""
    inputs: dict[str, str] = {}
    for dep in deps:
        if not manifest.stage_done(dep):
            raise StageDependencyError(stage, dep)
        for artifact, digest in manifest.stage(dep)["artifacts"].items():
            inputs[artifact] = digest
    return inputs


# ----------------------------------------------------------------------
# artifact codecs

CORPUS_TRAIN = "corpus_train.jsonl"
CORPUS_TEST = "corpus_test.jsonl"
VOCAB_FILE = "vocab.txt"
EMBEDDINGS_FILE = "embeddings.txt"
SAMPLE_FILE = "sample.txt"
ANNOTATIONS_FILE = "annotations.jsonl"
CLUSTERS_FILE = "clusters.txt"
KEYWORDS_FILE = "keywords.txt"
CHECKPOINT_FILE = "checkpoint.npz"
REPORT_FILE = "train_report.json"
EVAL_FILE = "eval.json"


def write_corpus_jsonl(path, corpus: Corpus) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"num_classes": corpus.num_classes, "split": corpus.split}) + "\n")
        for doc in corpus:
            fh.write(
                json.dumps(
                    {"id": doc.id, "label": doc.label, "tokens": list(doc.tokens)}
                )
                + "\n"
            )


def read_corpus_jsonl(path) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        documents = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            data = json.loads(line)
            documents.append(
                Document(
                    id=int(data["id"]),
                    label=int(data["label"]),
                    tokens=tuple(data["tokens"]),
                )
            )
    return Corpus(tuple(documents), num_classes=int(header["num_classes"]),
                  split=str(header["split"]))


def write_vocab(path, vocab: Vocabulary) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for token in vocab.regular_tokens:
            fh.write(token + "\n")


def read_vocab(path) -> Vocabulary:
    with open(path, encoding="utf-8") as fh:
        tokens = [line.rstrip("\n") for line in fh if line.rstrip("\n")]
    return Vocabulary.from_tokens(tokens)


def write_sample(path, ids) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id in sorted(ids):
            fh.write(f"{doc_id}\n")


def read_sample(path) -> set[int]:
    with open(path, encoding="utf-8") as fh:
        return {int(line) for line in fh if line.strip()}


def write_clusters(path, vocab: Vocabulary, labels) -> None:
    tokens = vocab.regular_tokens
    if len(tokens) != len(labels):
        raise ValueError("one cluster label per regular vocab token expected")
    with open(path, "w", encoding="utf-8") as fh:
        for token, label in zip(tokens, labels):
            fh.write(f"{token} {int(label)}\n")


def read_clusters(path) -> dict[str, int]:
    mapping: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            token, label = line.split(" ")
            mapping[token] = int(label)
    return mapping


# ----------------------------------------------------------------------
# stages


def stage_ingest(
    manifest: Manifest,
    data_path,
    num_classes: int,
    test_path=None,
    min_freq: int = DEFAULT_MIN_FREQ,
    max_len: int = DEFAULT_MAX_LEN,
    embeddings_path=None,
    embedding_dim: int = 50,
    embedding_seed: int = 0,
) -> str:
    """Load corpora, build the vocabulary, and materialize the embedding table."""
    config = {
        "data": str(data_path),
        "test": str(test_path) if test_path else None,
        "num_classes": num_classes,
        "min_freq": min_freq,
        "max_len": max_len,
        "embeddings": str(embeddings_path) if embeddings_path else None,
        "dim": embedding_dim,
        "embedding_seed": embedding_seed,
    }
    inputs = {"data": file_sha256(data_path)}
    if test_path:
        inputs["test"] = file_sha256(test_path)
    if embeddings_path:
        inputs["embeddings_source"] = file_sha256(embeddings_path)
    if manifest.stage_current(STAGE_INGEST, config, inputs):
        logger.info("ingest: skipped (up to date)")
        return "skipped"
    train = load_corpus(data_path, num_classes, split="train", max_len=max_len)
    artifacts = [CORPUS_TRAIN, VOCAB_FILE, EMBEDDINGS_FILE]
    write_corpus_jsonl(manifest.artifact(CORPUS_TRAIN), train)
    if test_path:
        test = load_corpus(test_path, num_classes, split="test", max_len=max_len)
        write_corpus_jsonl(manifest.artifact(CORPUS_TEST), test)
        artifacts.append(CORPUS_TEST)
    vocab = build_vocab(train, min_freq=min_freq)
    write_vocab(manifest.artifact(VOCAB_FILE), vocab)
    if embeddings_path:
        table = load_pretrained(embeddings_path, vocab, embedding_dim, oov_seed=embedding_seed)
    else:
        table = init_random(vocab, embedding_dim, embedding_seed)
    save_text(manifest.artifact(EMBEDDINGS_FILE), table)
    manifest.config.update(config)
    manifest.record_stage(STAGE_INGEST, artifacts, config, inputs)
    logger.info("ingest: %d train docs, vocab %d, dim %d", len(train), len(vocab), table.dim)
    return "ran"


def _load_ingested(manifest: Manifest):
    train = read_corpus_jsonl(manifest.artifact(CORPUS_TRAIN))
    test_path = manifest.artifact(CORPUS_TEST)
    test = read_corpus_jsonl(test_path) if test_path.exists() else None
    vocab = read_vocab(manifest.artifact(VOCAB_FILE))
    dim = int(manifest.config["dim"])
    table = load_text(manifest.artifact(EMBEDDINGS_FILE), vocab, dim)
    return train, test, vocab, table


def stage_sample(manifest: Manifest, ratio: float, seed: int) -> str:
    config = {"ratio": ratio, "seed": seed}
    inputs = _require_upstream(manifest, STAGE_SAMPLE, UPSTREAM[STAGE_SAMPLE])
    if manifest.stage_current(STAGE_SAMPLE, config, inputs):
        logger.info("sample: skipped (up to date)")
        return "skipped"
    train = read_corpus_jsonl(manifest.artifact(CORPUS_TRAIN))
    ids = sample_corpus(train, ratio, seed)
    write_sample(manifest.artifact(SAMPLE_FILE), ids)
    manifest.record_stage(STAGE_SAMPLE, [SAMPLE_FILE], config, inputs)
    logger.info("sample: %d documents", len(ids))
    return "ran"


def stage_annotate(
    manifest: Manifest, oracle: str = "tfidf", seed: int = 0, per_doc: int = 3
) -> str:
    """Headless annotation via the simulated annotator."""
    config = {"oracle": oracle, "seed": seed, "per_doc": per_doc}
    inputs = _require_upstream(manifest, STAGE_ANNOTATE, UPSTREAM[STAGE_ANNOTATE])
    if manifest.stage_current(STAGE_ANNOTATE, config, inputs):
        logger.info("annotate: skipped (up to date)")
        return "skipped"
    train = read_corpus_jsonl(manifest.artifact(CORPUS_TRAIN))
    ids = read_sample(manifest.artifact(SAMPLE_FILE))
    docs = [train.by_id(i) for i in sorted(ids)]
    records = simulate_annotator(docs, oracle=oracle, seed=seed, per_doc=per_doc,
                                 num_classes=train.num_classes)
    log_path = manifest.artifact(ANNOTATIONS_FILE)
    if log_path.exists():
        log_path.unlink()
    # Deterministic clock so the record log is byte-stable across runs.
    counter = iter(range(1_000_000_000))
    service = AnnotationService(docs, log_path=log_path, clock=lambda: float(next(counter)))
    apply_records(service, records)
    manifest.record_stage(STAGE_ANNOTATE, [ANNOTATIONS_FILE], config, inputs)
    logger.info("annotate: %d records, %d seed tokens", len(records),
                len(service.seed_tokens))
    return "ran"


def stage_cluster(manifest: Manifest, cluster_config: ClusterConfig) -> str:
    config = asdict(cluster_config)
    inputs = _require_upstream(manifest, STAGE_CLUSTER, UPSTREAM[STAGE_CLUSTER])
    if manifest.stage_current(STAGE_CLUSTER, config, inputs):
        logger.info("cluster: skipped (up to date)")
        return "skipped"
    _, _, vocab, table = _load_ingested(manifest)
    points = table.matrix[2:]  # regular tokens only; PAD/UNK carry no meaning
    assignment = cluster_points(points, cluster_config)
    write_clusters(manifest.artifact(CLUSTERS_FILE), vocab, assignment.labels)
    manifest.record_stage(STAGE_CLUSTER, [CLUSTERS_FILE], config, inputs)
    realized = len(set(assignment.labels[assignment.labels != NOISE]))
    logger.info("cluster: %s produced %d clusters", cluster_config.method, realized)
    return "ran"


def stage_expand(manifest: Manifest) -> str:
    config: dict = {}
    inputs = _require_upstream(manifest, STAGE_EXPAND, UPSTREAM[STAGE_EXPAND])
    if manifest.stage_current(STAGE_EXPAND, config, inputs):
        logger.info("expand: skipped (up to date)")
        return "skipped"
    token_clusters = read_clusters(manifest.artifact(CLUSTERS_FILE))
    records = load_records(manifest.artifact(ANNOTATIONS_FILE))
    seeds = seed_tokens_from_records(records)
    in_domain = frozenset(t for t in seeds if t in token_clusters)
    dropped = len(seeds) - len(in_domain)
    if dropped:
        logger.info("expand: %d seed tokens outside the clusterable vocabulary", dropped)
    keyword_sets = expand_keywords(token_clusters, in_domain)
    save_keywords(manifest.artifact(KEYWORDS_FILE), keyword_sets)
    manifest.record_stage(STAGE_EXPAND, [KEYWORDS_FILE], config, inputs)
    logger.info("expand: %d seeds -> %d keywords", len(in_domain), len(keyword_sets))
    return "ran"


def keyword_context_for(manifest: Manifest, ablation: str,
                        tfidf_per_text: int = 10) -> KeywordContext:
    """Build the keyword context a training run needs for its ablation tag."""
    if ablation == trainer.ABLATION_NO_KEYWORDS:
        return KeywordContext()
    if ablation == trainer.ABLATION_TFIDF:
        train = read_corpus_jsonl(manifest.artifact(CORPUS_TRAIN))
        test_path = manifest.artifact(CORPUS_TEST)
        per_doc = dict(tfidf_keywords(train, per_text=tfidf_per_text))
        if test_path.exists():
            test = read_corpus_jsonl(test_path)
            per_doc.update(tfidf_keywords(test, per_text=tfidf_per_text))
        return KeywordContext(kind="per_doc", per_doc=per_doc)
    if ablation == trainer.ABLATION_NO_CLUSTERING:
        records = load_records(manifest.artifact(ANNOTATIONS_FILE))
        return KeywordContext(kind="global", tokens=seed_tokens_from_records(records))
    keyword_sets = load_keywords(manifest.artifact(KEYWORDS_FILE))
    return KeywordContext(kind="global", tokens=keyword_sets.expanded)


def _train_deps(ablation: str) -> tuple[str, ...]:
    return UPSTREAM[STAGE_TRAIN] + TRAIN_KEYWORD_DEPS[ablation]


def stage_train(manifest: Manifest, train_config: TrainConfig) -> str:
    config = asdict(train_config)
    inputs = _require_upstream(manifest, STAGE_TRAIN, _train_deps(train_config.ablation))
    if manifest.stage_current(STAGE_TRAIN, config, inputs):
        logger.info("train: skipped (up to date)")
        return "skipped"
    train_corpus, test_corpus, vocab, table = _load_ingested(manifest)
    context = keyword_context_for(manifest, train_config.ablation)
    params, report = trainer.train(
        train_corpus, test_corpus, vocab, table, context, train_config
    )
    keyword_union = context.union()
    keyword_sets = KeywordSets(frozenset(), keyword_union,
                               {t: "cluster" for t in keyword_union})
    models.save_checkpoint(
        manifest.artifact(CHECKPOINT_FILE),
        params,
        {"keywords_sha256": keyword_sets.sha256(), "ablation": train_config.ablation},
    )
    manifest.artifact(REPORT_FILE).write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    )
    manifest.record_stage(STAGE_TRAIN, [CHECKPOINT_FILE, REPORT_FILE], config, inputs)
    logger.info("train: final accuracy %s", report.final_accuracy)
    return "ran"


def stage_eval(manifest: Manifest) -> str:
    config: dict = {}
    inputs = _require_upstream(manifest, STAGE_EVAL, UPSTREAM[STAGE_EVAL])
    if manifest.stage_current(STAGE_EVAL, config, inputs):
        logger.info("eval: skipped (up to date)")
        return "skipped"
    _, test_corpus, vocab, table = _load_ingested(manifest)
    if test_corpus is None:
        raise StageDependencyError(STAGE_EVAL, "a test split (ingest --test-data)")
    params, meta = models.load_checkpoint(manifest.artifact(CHECKPOINT_FILE))
    ablation = meta.get("ablation", trainer.ABLATION_FULL)
    context = keyword_context_for(manifest, ablation)
    accuracy = trainer.evaluate(params, test_corpus, vocab, table, context)
    manifest.artifact(EVAL_FILE).write_text(
        json.dumps({"accuracy": accuracy, "model": meta["model"]}, indent=2) + "\n"
    )
    manifest.record_stage(STAGE_EVAL, [EVAL_FILE], config, inputs)
    logger.info("eval: accuracy %.4f", accuracy)
    return "ran"


# ----------------------------------------------------------------------
# experiment commands


def _ablation_run(args) -> tuple[str, int, float]:
    manifest_path, variant, ablation, seed, base_config = args
    manifest = Manifest(manifest_path)
    train_corpus, test_corpus, vocab, table = _load_ingested(manifest)
    if test_corpus is None:
        raise StageDependencyError("ablate", "a test split (ingest --test-data)")
    config = replace(
        TrainConfig(**base_config), variant=variant, ablation=ablation, seed=seed
    )
    context = keyword_context_for(manifest, ablation)
    _, report = trainer.train(train_corpus, test_corpus, vocab, table, context, config)
    return ablation, seed, float(report.final_accuracy)


def ablate(
    manifest: Manifest,
    variants,
    seeds,
    base_config: TrainConfig | None = None,
    threads: int = 1,
) -> list[dict]:
    """Train every (ablation variant, seed) pair and tabulate accuracies.

    Returns one row per variant with per-seed accuracies and their mean;
    writes ablation.csv and ablation.txt next to the manifest.
    """
    base_config = base_config or TrainConfig()
    for ablation in variants:
        deps = _train_deps(ablation)
        _require_upstream(manifest, STAGE_TRAIN, deps)
    base = asdict(base_config)
    base.pop("ablation", None)
    base.pop("seed", None)
    variant = base.pop("variant")
    jobs = [
        (str(manifest.path), variant, ablation, seed, base)
        for ablation in variants
        for seed in seeds
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_ablation_run, jobs))
    else:
        results = [_ablation_run(job) for job in jobs]
    by_variant: dict[str, dict[int, float]] = {}
    for ablation, seed, accuracy in results:
        by_variant.setdefault(ablation, {})[seed] = accuracy
    rows = []
    for ablation in variants:
        accs = [by_variant[ablation][s] for s in seeds]
        rows.append(
            {
                "variant": ablation,
                **{f"seed_{s}": a for s, a in zip(seeds, accs)},
                "mean": float(np.mean(accs)),
            }
        )
    _write_table(manifest.artifact("ablation"), rows)
    return rows


def sweep_fcn_length(
    manifest: Manifest,
    s_values,
    base_config: TrainConfig | None = None,
    threads: int = 1,
) -> list[dict]:
    """Train one hybrid model per keyword-slot count and tabulate accuracy."""
    base_config = base_config or TrainConfig(variant=models.VARIANT_HDNN_R)
    if base_config.variant == models.VARIANT_KARNN:
        raise ValueError("the slot-count sweep applies to the hybrid variants only")
    deduped = []
    for s in s_values:
        if s in deduped:
            logger.warning("duplicate slot count %d ignored", s)
        else:
            deduped.append(s)
    _require_upstream(manifest, STAGE_TRAIN, _train_deps(base_config.ablation))
    context = keyword_context_for(manifest, base_config.ablation)
    train_corpus, test_corpus, vocab, table = _load_ingested(manifest)
    if test_corpus is None:
        raise StageDependencyError("sweep-fcn", "a test split (ingest --test-data)")
    rows = []
    for s in deduped:
        config = replace(base_config, slot_count=int(s))
        _, report = trainer.train(train_corpus, test_corpus, vocab, table, context, config)
        rows.append({"slots": int(s), "accuracy": float(report.final_accuracy)})
    _write_table(manifest.artifact("sweep_fcn"), rows)
    return rows


def _write_table(base_path: Path, rows: list[dict]) -> None:
    """Emit rows as aligned text and as CSV."""
    if not rows:
        return
    headers = list(rows[0].keys())
    csv_path = base_path.with_suffix(".csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=headers)
        writer.writeheader()
        writer.writerows(rows)
    widths = {
        h: max(len(h), *(len(_format_cell(r[h])) for r in rows)) for h in headers
    }
    lines = ["  ".join(h.ljust(widths[h]) for h in headers)]
    for row in rows:
        lines.append("  ".join(_format_cell(row[h]).ljust(widths[h]) for h in headers))
    base_path.with_suffix(".txt").write_text("\n".join(lines) + "\n")


def _format_cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)
