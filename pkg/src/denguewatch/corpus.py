"""News corpus store: ingestion, validation, normalization, geotagging, stats.

Records live in ``corpus.jsonl`` inside the data directory, one JSON object
per line with fields ``id, url, source_domain, published_on, title, body``
and an optional ``region`` object. Normalized token lists are persisted
separately in ``tokens.jsonl``. Writes are serialized through a file lock;
reads never need one.
"""

from __future__ import annotations

import datetime as dt
import json
from collections import Counter
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from filelock import FileLock

from .regions import Gazetteer, GazetteerError, RegionRef
from .serialize import append_jsonl, atomic_write_text, canonical_json, read_jsonl
from .textnorm import DEFAULT_SCRIPT_RANGES, tokenize

DEFAULT_DATE_RANGE = (dt.date(2017, 1, 1), dt.date(2020, 7, 31))

CORPUS_FILE = "corpus.jsonl"
TOKENS_FILE = "tokens.jsonl"


@dataclass(frozen=True)
class NewsRecord:
    id: str
    url: str
    source_domain: str
    published_on: dt.date
    title: str
    body: str
    region: RegionRef | None = None

    def as_dict(self) -> dict:
        d = {
            "id": self.id,
            "url": self.url,
            "source_domain": self.source_domain,
            "published_on": self.published_on.isoformat(),
            "title": self.title,
            "body": self.body,
        }
        if self.region is not None:
            d["region"] = self.region.as_dict()
        return d


@dataclass(frozen=True)
class TokenizedDoc:
    doc_id: str
    tokens: tuple[str, ...]

    @property
    def token_counts(self) -> Counter:
        return Counter(self.tokens)

    @property
    def token_set(self) -> frozenset[str]:
        return frozenset(self.tokens)


@dataclass(frozen=True)
class CorpusStats:
    year: int
    total_crawled: int
    dengue_related: int

    @property
    def percentage(self) -> float | None:
        """Exact ratio dengue/total; None for an empty year (no zero division)."""
        if self.total_crawled == 0:
            return None
        return self.dengue_related / self.total_crawled

    @property
    def percent_display(self) -> str | None:
        """Ratio rendered as a percent string with 2 decimals, round-half-up."""
        if self.total_crawled == 0:
            return None
        pct = Decimal(self.dengue_related) * 100 / Decimal(self.total_crawled)
        return f"{pct.quantize(Decimal('0.01'), rounding=ROUND_HALF_UP)}%"

    def as_dict(self) -> dict:
        return {
            "year": self.year,
            "total_crawled": self.total_crawled,
            "dengue_related": self.dengue_related,
            "percentage": self.percentage,
            "percent_display": self.percent_display,
        }


@dataclass
class IngestReport:
    accepted: int = 0
    rejects: list[tuple[int, str]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "rejects": [{"line": ln, "reason": r} for ln, r in self.rejects],
        }


def parse_record(obj: dict, gazetteer: Gazetteer, date_range=DEFAULT_DATE_RANGE) -> NewsRecord:
    """Validate one raw corpus object. Raises ValueError with the reason."""
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    for key in ("id", "url", "source_domain", "published_on", "title", "body"):
        if key not in obj:
            raise ValueError(f"missing field {key!r}")
        if not isinstance(obj[key], str):
            raise ValueError(f"field {key!r} must be a string")
    rid = obj["id"]
    if not rid:
        raise ValueError("empty id")
    try:
        published = dt.date.fromisoformat(obj["published_on"])
    except ValueError:
        raise ValueError(f"published_on {obj['published_on']!r} is not an ISO-8601 date") from None
    lo, hi = date_range
    if not lo <= published <= hi:
        raise ValueError(f"published_on {published.isoformat()} outside range {lo}..{hi}")
    if not obj["title"].strip():
        raise ValueError("title empty after trim")
    region = None
    if obj.get("region") is not None:
        try:
            region = RegionRef.from_dict(obj["region"])
            gazetteer.validate_region(region)
        except (KeyError, TypeError):
            raise ValueError("region object must carry division and district") from None
        except GazetteerError as exc:
            raise ValueError(f"invalid region: {exc}") from None
    return NewsRecord(
        id=rid,
        url=obj["url"],
        source_domain=obj["source_domain"],
        published_on=published,
        title=obj["title"],
        body=obj["body"],
        region=region,
    )


def normalize_record(
    record: NewsRecord,
    stopwords: frozenset[str] = frozenset(),
    script_ranges=DEFAULT_SCRIPT_RANGES,
) -> TokenizedDoc:
    """Tokenize title+body and drop stopwords. Empty output is legal."""
    tokens = tokenize(record.title + " " + record.body, script_ranges)
    return TokenizedDoc(record.id, tuple(t for t in tokens if t not in stopwords))


def geotag(record: NewsRecord, gazetteer: Gazetteer) -> RegionRef | None:
    """Deterministic gazetteer attribution; see Gazetteer.geotag_tokens for the rule."""
    return gazetteer.geotag_tokens(tokenize(record.title), tokenize(record.body))


class CorpusStore:
    """Append-only record store rooted at a data directory. Single writer, many readers."""

    def __init__(self, data_dir: Path | str, gazetteer: Gazetteer | None = None):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.gazetteer = gazetteer or Gazetteer.load()
        self._lock = FileLock(str(self.data_dir / ".corpus.lock"))

    @property
    def corpus_path(self) -> Path:
        return self.data_dir / CORPUS_FILE

    @property
    def tokens_path(self) -> Path:
        return self.data_dir / TOKENS_FILE

    def ids(self) -> set[str]:
        if not self.corpus_path.exists():
            return set()
        return {obj["id"] for _, obj in read_jsonl(self.corpus_path)}

    def records(self) -> list[NewsRecord]:
        if not self.corpus_path.exists():
            return []
        return [
            parse_record(obj, self.gazetteer) for _, obj in read_jsonl(self.corpus_path)
        ]

    def ingest_file(self, path: Path | str, date_range=DEFAULT_DATE_RANGE) -> IngestReport:
        """Validate and append records from a corpus file.

        Duplicates and invalid records are reported with their line number,
        never silently dropped.
        """
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"corpus file not found: {path}")
        report = IngestReport()
        accepted: list[dict] = []
        with self._lock:
            seen = self.ids()
            with open(path, encoding="utf-8") as f:
                for lineno, line in enumerate(f, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        obj = json.loads(line)
                    except json.JSONDecodeError as exc:
                        report.rejects.append((lineno, f"malformed line: {exc.msg}"))
                        continue
                    try:
                        record = parse_record(obj, self.gazetteer, date_range)
                    except ValueError as exc:
                        report.rejects.append((lineno, str(exc)))
                        continue
                    if record.id in seen:
                        report.rejects.append((lineno, f"duplicate id {record.id!r}"))
                        continue
                    seen.add(record.id)
                    accepted.append(record.as_dict())
            append_jsonl(self.corpus_path, accepted)
        report.accepted = len(accepted)
        return report

    def export(self, path: Path | str) -> int:
        """Write the store back out in corpus file format. Re-ingest round-trips."""
        records = self.records()
        atomic_write_text(path, "".join(canonical_json(r.as_dict()) + "\n" for r in records))
        return len(records)

    def write_tokens(self, docs: list[TokenizedDoc]) -> None:
        with self._lock:
            rows = [{"doc_id": d.doc_id, "tokens": list(d.tokens)} for d in docs]
            atomic_write_text(
                self.tokens_path, "".join(canonical_json(r) + "\n" for r in rows)
            )

    def normalize_all(self, stopwords: frozenset[str]) -> list[TokenizedDoc]:
        docs = [normalize_record(r, stopwords) for r in self.records()]
        self.write_tokens(docs)
        return docs

    def tokenized_docs(self) -> list[TokenizedDoc]:
        if not self.tokens_path.exists():
            return []
        return [
            TokenizedDoc(obj["doc_id"], tuple(obj["tokens"]))
            for _, obj in read_jsonl(self.tokens_path)
        ]

    def token_sets(self) -> dict[str, frozenset[str]]:
        """doc_id -> token set; falls back to raw tokenization when tokens.jsonl is absent."""
        if self.tokens_path.exists():
            return {d.doc_id: d.token_set for d in self.tokenized_docs()}
        return {
            r.id: frozenset(tokenize(r.title + " " + r.body)) for r in self.records()
        }

    def stats(self, year: int, keywords: frozenset[str]) -> CorpusStats:
        """Yearly totals plus the count of records whose tokens meet the keyword filter."""
        total = 0
        dengue = 0
        token_sets = self.token_sets()
        for record in self.records():
            if record.published_on.year != year:
                continue
            total += 1
            toks = token_sets.get(record.id, frozenset())
            if toks & keywords:
                dengue += 1
        return CorpusStats(year=year, total_crawled=total, dengue_related=dengue)
