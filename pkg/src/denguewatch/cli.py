"""Command-line interface. Read commands print the same canonical JSON
payloads the HTTP service returns in its envelope ``data`` field."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import classify, kernels, topics, views
from .analytics import CaseStore
from .corpus import CorpusStore
from .hitl import HitlStore
from .serialize import canonical_json, load_json, read_jsonl, write_jsonl
from .textnorm import load_stopwords

TOPIC_MODEL_FILE = "topic_model.json"
FEATURES_FILE = "features.npz"


def _data_dir(args) -> Path:
    return Path(args.data_dir)


def cmd_ingest(args):
    store = CorpusStore(_data_dir(args))
    return store.ingest_file(args.file).as_dict()


def cmd_export(args):
    store = CorpusStore(_data_dir(args))
    n = store.export(args.file)
    return {"exported": n, "path": str(args.file)}


def cmd_normalize(args):
    store = CorpusStore(_data_dir(args))
    stopwords = load_stopwords(args.stopwords) if args.stopwords else frozenset()
    docs = store.normalize_all(stopwords)
    return {"normalized": len(docs), "stopwords": len(stopwords)}


def cmd_stats(args):
    return views.stats_payload(_data_dir(args), args.year)


def cmd_topics_fit(args):
    data_dir = _data_dir(args)
    config = topics.LdaConfig.from_dict(load_json(args.config)) if args.config else topics.LdaConfig()
    store = CorpusStore(data_dir)
    hitl_store = HitlStore(data_dir)
    docs = store.tokenized_docs()
    model = topics.fit(docs, hitl_store.seed_sets(), config, trace=args.trace)
    topics.save_model(model, data_dir / TOPIC_MODEL_FILE)
    out = {
        "docs": len(model.doc_ids),
        "vocab_size": len(model.vocab),
        "tokens": int(model.doc_lengths.sum()),
        "K": config.K,
        "iterations": config.iterations,
        "backend": kernels.backend_name(),
    }
    if args.trace:
        out["loglik_trace"] = model.loglik_trace
    return out


def cmd_topics_top_words(args):
    model = topics.load_model(_data_dir(args) / TOPIC_MODEL_FILE)
    words = topics.top_words(model, args.topic, args.n)
    return {"topic": args.topic, "words": [{"token": t, "weight": w} for t, w in words]}


def cmd_topics_propose(args):
    data_dir = _data_dir(args)
    model = topics.load_model(data_dir / TOPIC_MODEL_FILE)
    hitl_store = HitlStore(data_dir)
    lexicon = hitl_store.lexicon()
    candidates = topics.propose_candidates(model, lexicon.union, args.n)
    hitl_store.set_candidates(candidates)
    return {"candidates": candidates, "lexicon_version": lexicon.version}


def cmd_hitl_score(args):
    data_dir = _data_dir(args)
    store = HitlStore(data_dir)
    scores = store.score_all(CorpusStore(data_dir), args.combiner)
    scores.sort(key=lambda s: s.doc_id)
    return {"scores": [s.as_dict() for s in scores]}


def cmd_hitl_queue(args):
    data_dir = _data_dir(args)
    n = HitlStore(data_dir).enqueue_for_review(CorpusStore(data_dir), args.combiner)
    return {"queued": n}


def cmd_hitl_vote(args):
    store = HitlStore(_data_dir(args))
    doc = store.record_votes(args.doc_id, [args.vote1, args.vote2, args.vote3])
    return doc.as_dict()


def cmd_hitl_review(args):
    store = HitlStore(_data_dir(args))
    accept = load_json(args.decisions)
    lexicon = store.review_candidates(accept)
    out = lexicon.as_dict()
    out["terminated"] = store.terminated()
    return out


def cmd_hitl_export(args):
    store = HitlStore(_data_dir(args))
    out_path = Path(args.out) if args.out else _data_dir(args) / "labeled_export.jsonl"
    counts = store.export_labeled(out_path)
    return {"path": str(out_path), "counts": counts, "total": sum(counts.values())}


def cmd_hitl_import(args):
    store = HitlStore(_data_dir(args))
    n = store.import_labeled(args.file)
    return {"imported": n}


def cmd_hitl_metrics(args):
    data_dir = _data_dir(args)
    return HitlStore(data_dir).metrics(CorpusStore(data_dir), args.combiner)


def cmd_lexicon(args):
    return views.lexicon_payload(_data_dir(args), args.version)


def _load_labels(data_dir: Path, labels_file: str | None) -> dict[str, str]:
    path = Path(labels_file) if labels_file else data_dir / "labels.jsonl"
    if not path.exists():
        raise FileNotFoundError(f"no labels at {path}; run hitl vote/import first")
    return {row["doc_id"]: row["label"] for _, row in read_jsonl(path)}


def cmd_classify_featurize(args):
    import numpy as np

    data_dir = _data_dir(args)
    store = CorpusStore(data_dir)
    lexicon = HitlStore(data_dir).lexicon()
    docs = store.tokenized_docs()
    feats = classify.featurize(docs, lexicon)
    np.savez_compressed(
        data_dir / FEATURES_FILE,
        vocab=np.array(feats.space.vocab),
        doc_ids=np.array(feats.doc_ids),
        X=feats.X,
    )
    return {
        "docs": len(feats.doc_ids),
        "vocab_size": len(feats.space.vocab),
        "zero_docs": feats.zero_doc_ids,
        "feature_space_sha256": feats.space.sha256,
    }


def _load_features(data_dir: Path):
    import numpy as np

    path = data_dir / FEATURES_FILE
    if not path.exists():
        raise FileNotFoundError(f"no features at {path}; run classify featurize first")
    z = np.load(path, allow_pickle=False)
    space = classify.FeatureSpace(tuple(str(v) for v in z["vocab"]))
    return space, [str(d) for d in z["doc_ids"]], z["X"]


def cmd_classify_train(args):
    data_dir = _data_dir(args)
    space, doc_ids, X = _load_features(data_dir)
    labels_by_id = _load_labels(data_dir, args.labels)
    rows = [(i, labels_by_id[d]) for i, d in enumerate(doc_ids) if d in labels_by_id]
    if not rows:
        raise ValueError("no overlap between featurized docs and labels")
    idx = [i for i, _ in rows]
    labels = [l for _, l in rows]
    ids = [doc_ids[i] for i in idx]
    params = load_json(args.params) if args.params else {}
    model = classify.train_kind(args.kind, X[idx], labels, ids, params)
    model.feature_space_sha256 = space.sha256
    models_dir = data_dir / "models"
    models_dir.mkdir(exist_ok=True)
    out_path = models_dir / f"{args.kind}.json"
    classify.save_model(model, space, out_path)
    return {"kind": args.kind, "trained_on": len(labels), "path": str(out_path)}


def cmd_classify_eval(args):
    data_dir = _data_dir(args)
    space, doc_ids, X = _load_features(data_dir)
    labels_by_id = _load_labels(data_dir, args.labels)
    keep = [i for i, d in enumerate(doc_ids) if d in labels_by_id]
    feats = classify.Featurized(
        space=space,
        doc_ids=[doc_ids[i] for i in keep],
        X=X[keep],
    )
    labels = [labels_by_id[d] for d in feats.doc_ids]
    params = load_json(args.params) if args.params else {}
    return classify.evaluate(
        args.kinds, feats, labels, args.split_seed, params=params, repeats=args.repeats
    )


def cmd_classify_predict(args):
    import tempfile

    data_dir = _data_dir(args)
    model, space = classify.load_model(data_dir / "models" / f"{args.kind}.json")
    with tempfile.TemporaryDirectory() as tmp:
        slice_store = CorpusStore(tmp)
        report = slice_store.ingest_file(args.corpus_slice)
        stopwords = load_stopwords(args.stopwords) if args.stopwords else frozenset()
        docs = slice_store.normalize_all(stopwords)
    index = space.index
    import numpy as np

    X = np.zeros((len(docs), len(space.vocab)), dtype=np.int64)
    for i, doc in enumerate(docs):
        for tok in doc.tokens:
            j = index.get(tok)
            if j is not None:
                X[i, j] += 1
    preds = model.predict(X) if len(docs) else []
    rows = [
        {"doc_id": d.doc_id, "label": label, "kind": args.kind}
        for d, label in zip(docs, preds)
    ]
    write_jsonl(data_dir / views.PREDICTIONS_FILE, rows)
    counts = {c: sum(1 for r in rows if r["label"] == c) for c in ("Disease", "Intervention")}
    return {"predicted": len(rows), "rejected_records": len(report.rejects), "counts": counts}


def cmd_cases_ingest(args):
    return CaseStore(_data_dir(args)).ingest_file(args.file)


def cmd_aggregate(args):
    return views.aggregate_payload(
        _data_dir(args), args.level, args.region, args.start, args.end, args.limit, args.offset
    )


def cmd_correlate(args):
    return views.correlation_payload(_data_dir(args), args.region, args.lag, args.series)


def cmd_gaps(args):
    if args.threshold is None:
        return views.gaps_payload(_data_dir(args), args.start, args.end)
    return views.gaps_payload(_data_dir(args), args.start, args.end, args.threshold)


def cmd_citycorp(args):
    return views.citycorp_payload(_data_dir(args), args.start, args.end)


def cmd_queue_show(args):
    return views.queue_payload(_data_dir(args), args.limit, args.offset)


def cmd_serve(args):
    from .service import ApiConfig, serve

    config = ApiConfig.from_file(args.config) if args.config else ApiConfig()
    if args.host:
        config.host = args.host
    if args.port:
        config.port = args.port
    config.data_dir = str(_data_dir(args))
    if args.read_only:
        config.read_only = True
    if args.static_dir:
        config.static_dir = args.static_dir
    serve(config)
    return None


def cmd_synth_demo(args):
    from .synth import build_demo_data

    return build_demo_data(_data_dir(args), rng_seed=args.seed, scale=args.scale)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="denguewatch",
        description="Newspaper-based dengue surveillance pipeline",
    )
    parser.add_argument(
        "--data-dir",
        default=os.environ.get("DENGUEWATCH_DATA", "data"),
        help="data directory (or env DENGUEWATCH_DATA)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="ingest a corpus file")
    p.add_argument("file")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("export", help="export the corpus store")
    p.add_argument("file")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("normalize", help="tokenize and persist normalized docs")
    p.add_argument("--stopwords", help="stopword file, one token per line")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("stats", help="yearly corpus stats")
    p.add_argument("--year", type=int, required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("lexicon", help="show a lexicon version")
    p.add_argument("--version", type=int)
    p.set_defaults(func=cmd_lexicon)

    t = sub.add_parser("topics", help="seeded topic modeling")
    tsub = t.add_subparsers(dest="subcommand", required=True)
    p = tsub.add_parser("fit")
    p.add_argument("--config", help="JSON file with K/alpha/beta/boost/iterations/rng_seed")
    p.add_argument("--trace", action="store_true", help="record log-likelihood per sweep")
    p.set_defaults(func=cmd_topics_fit)
    p = tsub.add_parser("top-words")
    p.add_argument("--topic", type=int, required=True)
    p.add_argument("-n", type=int, default=10)
    p.set_defaults(func=cmd_topics_top_words)
    p = tsub.add_parser("propose")
    p.add_argument("-n", type=int, default=10)
    p.set_defaults(func=cmd_topics_propose)

    h = sub.add_parser("hitl", help="human-in-the-loop labeling")
    hsub = h.add_subparsers(dest="subcommand", required=True)
    p = hsub.add_parser("score")
    p.add_argument("--combiner", default="mean", choices=["mean", "max", "min"])
    p.set_defaults(func=cmd_hitl_score)
    p = hsub.add_parser("queue")
    p.add_argument("--combiner", default="mean", choices=["mean", "max", "min"])
    p.set_defaults(func=cmd_hitl_queue)
    p = hsub.add_parser("show-queue")
    p.add_argument("--limit", type=int, default=50)
    p.add_argument("--offset", type=int, default=0)
    p.set_defaults(func=cmd_queue_show)
    p = hsub.add_parser("vote")
    p.add_argument("doc_id")
    p.add_argument("vote1", choices=["Disease", "Intervention"])
    p.add_argument("vote2", choices=["Disease", "Intervention"])
    p.add_argument("vote3", choices=["Disease", "Intervention"])
    p.set_defaults(func=cmd_hitl_vote)
    p = hsub.add_parser("review")
    p.add_argument("--decisions", required=True, help="JSON file: {set_id: [accepted tokens]}")
    p.set_defaults(func=cmd_hitl_review)
    p = hsub.add_parser("export")
    p.add_argument("--out")
    p.set_defaults(func=cmd_hitl_export)
    p = hsub.add_parser("import")
    p.add_argument("file")
    p.set_defaults(func=cmd_hitl_import)
    p = hsub.add_parser("metrics")
    p.add_argument("--combiner", default="mean", choices=["mean", "max", "min"])
    p.set_defaults(func=cmd_hitl_metrics)

    c = sub.add_parser("classify", help="featurize, train, evaluate, predict")
    csub = c.add_subparsers(dest="subcommand", required=True)
    p = csub.add_parser("featurize")
    p.set_defaults(func=cmd_classify_featurize)
    p = csub.add_parser("train")
    p.add_argument("--kind", required=True, choices=["mnb", "knn", "svm"])
    p.add_argument("--labels", help="labels file (defaults to the session label store)")
    p.add_argument("--params", help="JSON file with hyperparameters")
    p.set_defaults(func=cmd_classify_train)
    p = csub.add_parser("eval")
    p.add_argument("--split-seed", type=int, default=42)
    p.add_argument("--kinds", nargs="+", default=["mnb", "knn", "svm"])
    p.add_argument("--labels")
    p.add_argument("--params")
    p.add_argument("--repeats", type=int)
    p.set_defaults(func=cmd_classify_eval)
    p = csub.add_parser("predict")
    p.add_argument("corpus_slice", help="corpus file to classify")
    p.add_argument("--kind", required=True, choices=["mnb", "knn", "svm"])
    p.add_argument("--stopwords")
    p.set_defaults(func=cmd_classify_predict)

    a = sub.add_parser("analytics", help="spatiotemporal reports")
    asub = a.add_subparsers(dest="subcommand", required=True)
    p = asub.add_parser("ingest-cases")
    p.add_argument("file")
    p.set_defaults(func=cmd_cases_ingest)
    p = asub.add_parser("aggregate")
    p.add_argument("--level", required=True, choices=["country", "division", "district", "thana"])
    p.add_argument("--region")
    p.add_argument("--from", dest="start")
    p.add_argument("--to", dest="end")
    p.add_argument("--limit", type=int, default=50)
    p.add_argument("--offset", type=int, default=0)
    p.set_defaults(func=cmd_aggregate)
    p = asub.add_parser("correlate")
    p.add_argument("--region")
    p.add_argument("--lag", type=int, default=0)
    p.add_argument("--series", default="all", choices=["all", "disease", "intervention"])
    p.set_defaults(func=cmd_correlate)
    p = asub.add_parser("gaps")
    p.add_argument("--from", dest="start", required=True)
    p.add_argument("--to", dest="end", required=True)
    p.add_argument("--threshold", type=float)
    p.set_defaults(func=cmd_gaps)
    p = asub.add_parser("citycorp")
    p.add_argument("--from", dest="start")
    p.add_argument("--to", dest="end")
    p.set_defaults(func=cmd_citycorp)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", help="JSON ApiConfig file")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--read-only", action="store_true")
    p.add_argument("--static-dir", help="serve a built web UI from this directory")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("synth-demo", help="populate a demo data directory")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--scale", type=float, default=0.2)
    p.set_defaults(func=cmd_synth_demo)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        payload = args.func(args)
    except (ValueError, FileNotFoundError, AssertionError) as exc:
        print(canonical_json({"error": str(exc)}), file=sys.stderr)
        return 1
    if payload is not None:
        print(canonical_json(payload))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
