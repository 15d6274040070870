"""Command-line entry point: pipeline stages, experiments, and the service."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields

from . import models, trainer
from .clustering import ClusterConfig
from .pipeline import (
    ANNOTATIONS_FILE,
    CHECKPOINT_FILE,
    CORPUS_TRAIN,
    KEYWORDS_FILE,
    SAMPLE_FILE,
    Manifest,
    ablate,
    keyword_context_for,
    read_corpus_jsonl,
    read_sample,
    stage_annotate,
    stage_cluster,
    stage_eval,
    stage_expand,
    stage_ingest,
    stage_sample,
    stage_train,
    sweep_fcn_length,
    _load_ingested,
)
from .trainer import TrainConfig


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--variant", default="karnn",
                        choices=list(models.VARIANTS))
    parser.add_argument("--ablation", default="full", choices=list(trainer.ABLATIONS))
    parser.add_argument("--epochs", type=int, default=5)
    parser.add_argument("--batch", type=int, default=32)
    parser.add_argument("--lr", type=float, default=1e-3)
    parser.add_argument("--optimizer", default="adam", choices=["adam", "sgd"])
    parser.add_argument("--lambda", dest="penalty", type=float, default=0.1,
                        help="keyword attention penalty coefficient")
    parser.add_argument("--hidden-size", type=int, default=128)
    parser.add_argument("--attention-size", type=int, default=64)
    parser.add_argument("--filter-width", type=int, default=3)
    parser.add_argument("--conv-channels", type=int, default=128)
    parser.add_argument("--slots", type=int, default=10)
    parser.add_argument("--fusion-dim", type=int, default=64)
    parser.add_argument("--patience", type=int, default=2)
    parser.add_argument("--fine-tune-embeddings", action="store_true")


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        learning_rate=args.lr,
        optimizer=args.optimizer,
        penalty=args.penalty,
        seed=args.seed,
        patience=args.patience,
        variant=args.variant,
        ablation=args.ablation,
        hidden_size=args.hidden_size,
        attention_size=args.attention_size,
        filter_width=args.filter_width,
        conv_channels=args.conv_channels,
        slot_count=args.slots,
        fusion_dim=args.fusion_dim,
        fine_tune_embeddings=args.fine_tune_embeddings,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kwsent",
        description="keyword-guided text sentiment classification pipeline",
    )
    parser.add_argument("--manifest", default="manifest.json",
                        help="pipeline manifest path (stage artifacts live beside it)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1,
                        help="parallel training processes for ablate/sweep-fcn")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load corpora, build vocab and embeddings")
    p.add_argument("--data", required=True, help="training CSV")
    p.add_argument("--test-data", default=None, help="test CSV")
    p.add_argument("--format", default="csv", choices=["csv"])
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--min-freq", type=int, default=2)
    p.add_argument("--max-len", type=int, default=256)
    p.add_argument("--embeddings", default=None,
                   help="pretrained text embeddings (token v1 .. vd per line)")
    p.add_argument("--random-embeddings", action="store_true")
    p.add_argument("--dim", type=int, default=50)

    p = sub.add_parser("sample", help="sample document ids for annotation")
    p.add_argument("--ratio", type=float, default=0.001)

    p = sub.add_parser("simulate-annotations", help="headless keyword annotation")
    p.add_argument("--oracle", default="tfidf", choices=["tfidf", "label"])
    p.add_argument("--per-doc", type=int, default=3)

    p = sub.add_parser("serve-annotation", help="serve the annotation UI and API")
    p.add_argument("--port", type=int, default=8700)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--sample-file", default=None,
                   help="document id list (defaults to the staged sample)")
    p.add_argument("--static", default=None,
                   help="directory of built UI assets to serve at /")

    p = sub.add_parser("cluster", help="cluster the embedding space")
    p.add_argument("--cluster-method", default="kmeans",
                   choices=["kmeans", "dbscan", "meanshift"])
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--min-pts", type=int, default=4)
    p.add_argument("--bandwidth", type=float, default=None)
    p.add_argument("--cluster-seed", type=int, default=0)
    p.add_argument("--metric", default="euclidean", choices=["euclidean", "cosine"])

    sub.add_parser("expand", help="expand seed keywords over the clusters")

    p = sub.add_parser("train", help="train one model")
    _add_train_flags(p)

    sub.add_parser("eval", help="evaluate the trained checkpoint on the test split")

    p = sub.add_parser("ablate", help="compare keyword ablation variants")
    p.add_argument("--variants", default="full,NC,N",
                   help="comma-separated subset of full,NC,T,N")
    p.add_argument("--seeds", default="0,1,2", help="comma-separated seeds")
    _add_train_flags(p)

    p = sub.add_parser("sweep-fcn", help="sweep the keyword-slot count")
    p.add_argument("--s-values", default="5,10,15,20,25")
    _add_train_flags(p)

    p = sub.add_parser("predict", help="classify a text with the trained checkpoint")
    p.add_argument("--text", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    manifest = Manifest(args.manifest)

    if args.command == "ingest":
        if args.embeddings and args.random_embeddings:
            print("use either --embeddings or --random-embeddings", file=sys.stderr)
            return 2
        status = stage_ingest(
            manifest,
            args.data,
            args.classes,
            test_path=args.test_data,
            min_freq=args.min_freq,
            max_len=args.max_len,
            embeddings_path=args.embeddings,
            embedding_dim=args.dim,
            embedding_seed=args.seed,
        )
        print(f"ingest: {status}")
    elif args.command == "sample":
        status = stage_sample(manifest, args.ratio, args.seed)
        print(f"sample: {status}")
    elif args.command == "simulate-annotations":
        status = stage_annotate(manifest, oracle=args.oracle, seed=args.seed,
                                per_doc=args.per_doc)
        print(f"annotate: {status}")
    elif args.command == "serve-annotation":
        _serve(manifest, args)
    elif args.command == "cluster":
        config = ClusterConfig(
            method=args.cluster_method,
            k=args.k,
            max_iter=args.max_iter,
            eps=args.eps,
            min_pts=args.min_pts,
            bandwidth=args.bandwidth,
            seed=args.cluster_seed,
            metric=args.metric,
        )
        status = stage_cluster(manifest, config)
        print(f"cluster: {status}")
    elif args.command == "expand":
        status = stage_expand(manifest)
        print(f"expand: {status}")
    elif args.command == "train":
        status = stage_train(manifest, _train_config(args))
        print(f"train: {status}")
    elif args.command == "eval":
        status = stage_eval(manifest)
        print(f"eval: {status}")
        print(manifest.artifact("eval.json").read_text().strip())
    elif args.command == "ablate":
        variants = [v.strip() for v in args.variants.split(",") if v.strip()]
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
        rows = ablate(manifest, variants, seeds, base_config=_train_config(args),
                      threads=args.threads)
        print(manifest.artifact("ablation.txt").read_text().rstrip())
    elif args.command == "sweep-fcn":
        s_values = [int(s) for s in args.s_values.split(",") if s.strip()]
        rows = sweep_fcn_length(manifest, s_values, base_config=_train_config(args),
                                threads=args.threads)
        print(manifest.artifact("sweep_fcn.txt").read_text().rstrip())
    elif args.command == "predict":
        _predict(manifest, args.text)
    return 0


def _predict(manifest: Manifest, text: str) -> None:
    from .corpus import Document, tokenize
    from .keywords import build_slots

    _, _, vocab, table = _load_ingested(manifest)
    params, meta = models.load_checkpoint(manifest.artifact(CHECKPOINT_FILE))
    tokens = tokenize(text)[: int(manifest.config.get("max_len", 256))]
    if not tokens:
        print("text is empty after tokenization", file=sys.stderr)
        raise SystemExit(2)
    token_ids = vocab.encode(tokens)
    emb = models.embedding_tensor(table.matrix)
    slots = None
    if not isinstance(params, models.KarnnParams):
        context = keyword_context_for(manifest, meta.get("ablation", "full"))
        doc = Document(id=0, label=0, tokens=tuple(tokens))
        slots = build_slots(doc, context.union(), params.slot_count, vocab)
    label = models.predict(params, token_ids, emb, slot_ids=slots)
    print(json.dumps({"class_index": label, "one_based_class": label + 1}))


def _serve(manifest: Manifest, args) -> None:
    import uvicorn

    from .annotation import AnnotationService
    from .annotation_http import create_app

    train = read_corpus_jsonl(manifest.artifact(CORPUS_TRAIN))
    sample_path = args.sample_file or manifest.artifact(SAMPLE_FILE)
    ids = read_sample(sample_path)
    docs = [train.by_id(i) for i in sorted(ids)]
    service = AnnotationService(docs, log_path=manifest.artifact(ANNOTATIONS_FILE))
    app = create_app(service, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port)


if __name__ == "__main__":
    raise SystemExit(main())
