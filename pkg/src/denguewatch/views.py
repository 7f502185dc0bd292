"""Payload builders shared by the CLI and the HTTP service.

Every read surface (CLI subcommand or GET endpoint) renders exactly one of
these payloads through ``serialize.canonical_json``, which is what keeps the
two surfaces byte-identical over the same store.
"""

from __future__ import annotations

from pathlib import Path

from . import analytics
from .analytics import CaseStore, ClassifiedDoc
from .corpus import CorpusStore, geotag
from .hitl import HitlStore
from .regions import Gazetteer, load_thana_corporations
from .serialize import read_jsonl

PREDICTIONS_FILE = "predictions.jsonl"


def load_classified(
    data_dir: Path | str, gazetteer: Gazetteer | None = None
) -> list[ClassifiedDoc]:
    """Join records with labels: human labels win, model predictions fill in.

    Region attribution prefers the record's own region and falls back to the
    gazetteer geotag; docs with neither stay unattributed.
    """
    data_dir = Path(data_dir)
    gazetteer = gazetteer or Gazetteer.load()
    corpus = CorpusStore(data_dir, gazetteer)
    labels: dict[str, str] = {}
    pred_path = data_dir / PREDICTIONS_FILE
    if pred_path.exists():
        for _, row in read_jsonl(pred_path):
            labels[row["doc_id"]] = row["label"]
    hitl_labels = data_dir / "labels.jsonl"
    if hitl_labels.exists():
        for _, row in read_jsonl(hitl_labels):
            labels[row["doc_id"]] = row["label"]
    out = []
    for record in corpus.records():
        label = labels.get(record.id)
        if label is None:
            continue
        region = record.region or geotag(record, gazetteer)
        out.append(ClassifiedDoc(record.id, label, record.published_on, region))
    return out


def _region_filters(gazetteer: Gazetteer, region: str | None) -> dict:
    if not region:
        return {}
    from .regions import DIVISIONS

    if region in DIVISIONS:
        return {"division": region}
    if region in gazetteer.district_division:
        return {
            "division": gazetteer.district_division[region],
            "district": region,
        }
    raise ValueError(f"unknown region {region!r}")


def stats_payload(data_dir: Path | str, year: int) -> dict:
    corpus = CorpusStore(data_dir)
    lexicon = HitlStore(data_dir).lexicon()
    return corpus.stats(year, lexicon.union).as_dict()


def aggregate_payload(
    data_dir: Path | str,
    level: str,
    region: str | None = None,
    start: str | None = None,
    end: str | None = None,
    limit: int = 50,
    offset: int = 0,
) -> dict:
    gazetteer = Gazetteer.load()
    filters = _region_filters(gazetteer, region)
    docs = load_classified(data_dir, gazetteer)
    cases = CaseStore(data_dir, gazetteer).records()
    result = analytics.aggregate(
        docs, cases, level, start=start, end=end, gazetteer=gazetteer, **filters
    )
    total = len(result["rows"])
    result["rows"] = result["rows"][offset : offset + limit]
    result["total_rows"] = total
    result["limit"] = limit
    result["offset"] = offset
    return result


def correlation_payload(
    data_dir: Path | str,
    region: str | None = None,
    lag: int = 0,
    series: str = "all",
) -> dict:
    gazetteer = Gazetteer.load()
    filters = _region_filters(gazetteer, region)
    docs = load_classified(data_dir, gazetteer)
    cases = CaseStore(data_dir, gazetteer).records()
    level = "district" if "district" in filters else ("division" if filters else "country")
    agg = analytics.aggregate(docs, cases, level, gazetteer=gazetteer, **filters)
    news_series: dict[str, int] = {}
    case_series: dict[str, int] = {}
    for row in agg["rows"]:
        news = 0
        if series in ("all", "disease"):
            news += row["disease_news"]
        if series in ("all", "intervention"):
            news += row["intervention_news"]
        news_series[row["period"]] = news_series.get(row["period"], 0) + news
        case_series[row["period"]] = case_series.get(row["period"], 0) + row["official_cases"]
    result = analytics.correlate(news_series, case_series, lag)
    result["region"] = region
    result["series"] = series
    return result


def gaps_payload(
    data_dir: Path | str,
    start: str,
    end: str,
    threshold: float = analytics.DEFAULT_GAP_THRESHOLD,
) -> dict:
    gazetteer = Gazetteer.load()
    docs = load_classified(data_dir, gazetteer)
    cases = CaseStore(data_dir, gazetteer).records()
    agg = analytics.aggregate(docs, cases, "district", start=start, end=end, gazetteer=gazetteer)
    report = analytics.gap_rank(agg["rows"], threshold)
    report["from"] = start
    report["to"] = end
    report["unattributed_news"] = agg["unattributed_news"]
    return report


def citycorp_payload(
    data_dir: Path | str,
    start: str | None = None,
    end: str | None = None,
    mapping_path: Path | str | None = None,
) -> dict:
    gazetteer = Gazetteer.load()
    docs = load_classified(data_dir, gazetteer)
    cases = CaseStore(data_dir, gazetteer).records()
    agg = analytics.aggregate(
        docs, cases, "thana", start=start, end=end, division="Dhaka", gazetteer=gazetteer
    )
    mapping = load_thana_corporations(mapping_path)
    version = Path(mapping_path).name if mapping_path else "default"
    return analytics.compare_city_corporations(agg["rows"], mapping, version)


def lexicon_payload(data_dir: Path | str, version: int | None = None) -> dict:
    store = HitlStore(data_dir)
    payload = store.lexicon(version).as_dict()
    payload["current_version"] = store.iteration()
    payload["terminated"] = store.terminated()
    return payload


def queue_payload(data_dir: Path | str, limit: int = 50, offset: int = 0) -> dict:
    store = HitlStore(data_dir)
    corpus = CorpusStore(data_dir)
    pending = store.pending_docs()
    page = pending[offset : offset + limit]
    titles = {r.id: r.title for r in corpus.records()}
    tokens = {d.doc_id: list(d.tokens) for d in corpus.tokenized_docs()}
    docs = [
        {**row, "title": titles.get(row["doc_id"], ""), "tokens": tokens.get(row["doc_id"], [])}
        for row in page
    ]
    return {
        "total_pending": len(pending),
        "limit": limit,
        "offset": offset,
        "docs": docs,
        "candidates": store.pending_candidates(),
        "iteration": store.iteration(),
        "terminated": store.terminated(),
    }
