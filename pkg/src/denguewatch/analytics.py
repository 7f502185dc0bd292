"""Spatiotemporal analytics: aggregation, correlation, gap ranking, city split.

All computations are pure functions over immutable snapshots; the loaders at
the bottom adapt the on-disk stores. Monthly periods use "YYYY-MM" keys.

Official case counts enter from a tabular file with columns
``date, division, district, cases, source`` plus an optional ``thana``
column (city-corporation splits need thana-resolved counts; rows without it
aggregate at district level as usual). When two sources report the same
(date, region), the higher-precedence source wins (IEDCR over a2i by
default).
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

from filelock import FileLock

from .regions import Gazetteer, GazetteerError, RegionRef
from .serialize import append_jsonl, read_jsonl

CASES_FILE = "cases.jsonl"

LEVELS = ("country", "division", "district", "thana")
SOURCE_PRECEDENCE = ("IEDCR", "a2i", "fixture")
DEFAULT_GAP_THRESHOLD = 0.01


class UnsupportedGranularityError(ValueError):
    pass


@dataclass(frozen=True)
class CaseRecord:
    date: dt.date
    region: RegionRef
    cases: int
    source: str

    def as_dict(self) -> dict:
        d = {
            "date": self.date.isoformat(),
            "division": self.region.division,
            "district": self.region.district,
            "cases": self.cases,
            "source": self.source,
        }
        if self.region.thana is not None:
            d["thana"] = self.region.thana
        return d


@dataclass(frozen=True)
class ClassifiedDoc:
    doc_id: str
    label: str
    published_on: dt.date
    region: RegionRef | None


def month_key(date: dt.date) -> str:
    return f"{date.year:04d}-{date.month:02d}"


def shift_month(period: str, delta: int) -> str:
    year, month = (int(p) for p in period.split("-"))
    idx = year * 12 + (month - 1) + delta
    return f"{idx // 12:04d}-{idx % 12 + 1:02d}"


def period_in_range(period: str, start: str | None, end: str | None) -> bool:
    return (start is None or period >= start) and (end is None or period <= end)


# --------------------------------------------------------------------------
# Case ingestion
# --------------------------------------------------------------------------


class CaseStore:
    def __init__(self, data_dir: Path | str, gazetteer: Gazetteer | None = None):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.gazetteer = gazetteer or Gazetteer.load()
        self._lock = FileLock(str(self.data_dir / ".cases.lock"))

    @property
    def cases_path(self) -> Path:
        return self.data_dir / CASES_FILE

    def records(self) -> list[CaseRecord]:
        if not self.cases_path.exists():
            return []
        out = []
        for _, r in read_jsonl(self.cases_path):
            region = RegionRef(r["division"], r["district"], r.get("thana"))
            out.append(CaseRecord(dt.date.fromisoformat(r["date"]), region, r["cases"], r["source"]))
        return out

    def ingest_file(self, path: Path | str) -> dict:
        """Validate and append case rows from a CSV file; rejects are line-numbered."""
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"case file not found: {path}")
        accepted: list[dict] = []
        rejects: list[dict] = []
        with self._lock:
            seen = {(c.date, c.region, c.source) for c in self.records()}
            with open(path, encoding="utf-8", newline="") as f:
                reader = csv.DictReader(f)
                required = {"date", "division", "district", "cases", "source"}
                if reader.fieldnames is None or not required <= set(reader.fieldnames):
                    raise ValueError(
                        f"{path}: case file must have columns {sorted(required)}"
                    )
                for lineno, row in enumerate(reader, start=2):
                    try:
                        record = self._parse_row(row)
                    except ValueError as exc:
                        rejects.append({"line": lineno, "reason": str(exc)})
                        continue
                    key = (record.date, record.region, record.source)
                    if key in seen:
                        rejects.append(
                            {"line": lineno, "reason": "duplicate (date, region, source)"}
                        )
                        continue
                    seen.add(key)
                    accepted.append(record.as_dict())
            append_jsonl(self.cases_path, accepted)
        return {"accepted": len(accepted), "rejects": rejects}

    def _parse_row(self, row: dict) -> CaseRecord:
        try:
            date = dt.date.fromisoformat(row["date"])
        except (ValueError, TypeError):
            raise ValueError(f"bad date {row.get('date')!r}") from None
        try:
            cases = int(row["cases"])
        except (ValueError, TypeError):
            raise ValueError(f"bad cases count {row.get('cases')!r}") from None
        if cases < 0:
            raise ValueError(f"negative cases count {cases}")
        thana = row.get("thana") or None
        region = RegionRef(row["division"], row["district"], thana)
        try:
            self.gazetteer.validate_region(region)
        except GazetteerError as exc:
            raise ValueError(f"unknown region: {exc}") from None
        source = row["source"]
        if not source:
            raise ValueError("missing source")
        return CaseRecord(date, region, cases, source)


def resolve_case_conflicts(
    records: list[CaseRecord], precedence: tuple[str, ...] = SOURCE_PRECEDENCE
) -> list[CaseRecord]:
    """One record per (date, region): keep the highest-precedence source."""

    def rank(source: str) -> int:
        return precedence.index(source) if source in precedence else len(precedence)

    best: dict[tuple, CaseRecord] = {}
    for r in records:
        key = (r.date, r.region)
        cur = best.get(key)
        if cur is None or rank(r.source) < rank(cur.source):
            best[key] = r
    return list(best.values())


# --------------------------------------------------------------------------
# Aggregation
# --------------------------------------------------------------------------


def aggregate(
    docs: list[ClassifiedDoc],
    cases: list[CaseRecord],
    level: str,
    start: str | None = None,
    end: str | None = None,
    division: str | None = None,
    district: str | None = None,
    gazetteer: Gazetteer | None = None,
    precedence: tuple[str, ...] = SOURCE_PRECEDENCE,
) -> dict:
    """Monthly RegionAggregate rows at the requested level.

    Docs without a region contribute to the country level only and are
    disclosed in the ``unattributed_news`` field. Thana-level requests are
    only valid where thana resolution exists (Dhaka and Chittagong
    divisions).
    """
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}")
    gazetteer = gazetteer or Gazetteer.load()
    if level == "thana":
        from .regions import THANA_DIVISIONS

        target = division or (gazetteer.district_division.get(district) if district else None)
        if target is not None and target not in THANA_DIVISIONS:
            raise UnsupportedGranularityError(
                f"thana granularity is not available in {target!r} division"
            )

    cases = resolve_case_conflicts(cases, precedence)

    def case_key(r: CaseRecord):
        if level == "country":
            return ()
        if level == "division":
            return (r.region.division,)
        if level == "district":
            return (r.region.division, r.region.district)
        return (r.region.division, r.region.district, r.region.thana)

    def doc_key(region: RegionRef):
        if level == "country":
            return ()
        if level == "division":
            return (region.division,)
        if level == "district":
            return (region.division, region.district)
        return (region.division, region.district, region.thana)

    def in_filter(division_v: str, district_v: str | None) -> bool:
        if division and division_v != division:
            return False
        if district and district_v != district:
            return False
        return True

    counts: dict[tuple, dict] = defaultdict(
        lambda: {"disease_news": 0, "intervention_news": 0, "official_cases": 0}
    )
    unattributed = 0
    for doc in docs:
        period = month_key(doc.published_on)
        if not period_in_range(period, start, end):
            continue
        if doc.region is None:
            unattributed += 1
            if level == "country" and not (division or district):
                key = ((), period)
                counts[key]["disease_news" if doc.label == "Disease" else "intervention_news"] += 1
            continue
        if not in_filter(doc.region.division, doc.region.district):
            continue
        if level == "thana" and doc.region.thana is None:
            continue
        key = (doc_key(doc.region), period)
        counts[key]["disease_news" if doc.label == "Disease" else "intervention_news"] += 1

    for r in cases:
        period = month_key(r.date)
        if not period_in_range(period, start, end):
            continue
        if not in_filter(r.region.division, r.region.district):
            continue
        if level == "thana" and r.region.thana is None:
            continue
        counts[(case_key(r), period)]["official_cases"] += r.cases

    rows = []
    for (key, period), c in counts.items():
        region = None
        if level == "division":
            region = {"division": key[0]}
        elif level == "district":
            region = {"division": key[0], "district": key[1]}
        elif level == "thana":
            region = {"division": key[0], "district": key[1], "thana": key[2]}
        rows.append({"level": level, "region": region, "period": period, **c})
    rows.sort(key=lambda r: (r["period"], str(r["region"])))
    return {"level": level, "rows": rows, "unattributed_news": unattributed}


# --------------------------------------------------------------------------
# Correlation
# --------------------------------------------------------------------------


def pearson(xs: list[float], ys: list[float]) -> float | None:
    """Product-moment correlation; None when either series has zero variance."""
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    num = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    vx = sum((x - mx) ** 2 for x in xs)
    vy = sum((y - my) ** 2 for y in ys)
    if vx == 0.0 or vy == 0.0:
        return None
    return num / math.sqrt(vx * vy)


def correlate(
    news_series: dict[str, int],
    case_series: dict[str, int],
    lag: int = 0,
) -> dict:
    """Pearson r between monthly news and case counts.

    A positive ``lag`` pairs news in period p with cases in period p+lag
    (news leading). Needs >= 3 common periods; zero-variance series yield an
    explicit undefined result instead of NaN.
    """
    shifted = {shift_month(p, lag): v for p, v in news_series.items()}
    periods = sorted(set(shifted) & set(case_series))
    if len(periods) < 3:
        raise ValueError(f"need >= 3 aligned periods, got {len(periods)}")
    xs = [float(shifted[p]) for p in periods]
    ys = [float(case_series[p]) for p in periods]
    r = pearson(xs, ys)
    out = {"n": len(periods), "lag": lag, "periods": periods, "r": r}
    if r is None:
        out["undefined_reason"] = "zero variance in at least one series"
    return out


# --------------------------------------------------------------------------
# Gap ranking
# --------------------------------------------------------------------------


def gap_rank(
    district_rows: list[dict],
    threshold: float = DEFAULT_GAP_THRESHOLD,
) -> dict:
    """Rank districts by (case share - intervention-news share).

    ``district_rows`` are district-level aggregate rows (any period range,
    already filtered); shares are normalized over all districts present.
    """
    totals: dict[tuple, dict] = defaultdict(
        lambda: {"cases": 0, "disease": 0, "intervention": 0}
    )
    for row in district_rows:
        if row["region"] is None or "district" not in row["region"]:
            raise ValueError("gap ranking requires district-level rows")
        key = (row["region"]["division"], row["region"]["district"])
        totals[key]["cases"] += row["official_cases"]
        totals[key]["disease"] += row["disease_news"]
        totals[key]["intervention"] += row["intervention_news"]

    nonzero = [k for k, t in totals.items() if any(t.values())]
    if len(nonzero) < 2:
        raise ValueError("need at least 2 districts with nonzero totals")
    sum_cases = sum(t["cases"] for t in totals.values())
    sum_disease = sum(t["disease"] for t in totals.values())
    sum_interv = sum(t["intervention"] for t in totals.values())
    if sum_cases == 0 and sum_disease == 0 and sum_interv == 0:
        raise ValueError("all-zero period: nothing to rank")

    rows = []
    for (division, district), t in totals.items():
        case_share = t["cases"] / sum_cases if sum_cases else 0.0
        disease_share = t["disease"] / sum_disease if sum_disease else 0.0
        interv_share = t["intervention"] / sum_interv if sum_interv else 0.0
        gap = case_share - interv_share
        rows.append(
            {
                "division": division,
                "district": district,
                "case_share": case_share,
                "disease_share": disease_share,
                "intervention_share": interv_share,
                "gap_score": gap,
                "flagged": gap > threshold,
            }
        )
    rows.sort(key=lambda r: (-r["gap_score"], r["district"]))
    return {"threshold": threshold, "districts": rows}


# --------------------------------------------------------------------------
# City corporation comparison
# --------------------------------------------------------------------------


def compare_city_corporations(
    thana_rows: list[dict],
    mapping: dict[str, str],
    mapping_version: str = "default",
) -> dict:
    """DNCC vs DSCC totals per period from Dhaka thana-level aggregate rows.

    Thanas missing from the mapping are listed, never silently dropped.
    """
    corps = {"DNCC", "DSCC"}
    per_corp: dict[str, dict[str, dict]] = {
        c: defaultdict(lambda: {"disease_news": 0, "intervention_news": 0, "official_cases": 0})
        for c in corps
    }
    unmapped: set[str] = set()
    for row in thana_rows:
        region = row["region"]
        if region is None or "thana" not in region:
            raise ValueError("city corporation comparison requires thana-level rows")
        if region["district"] != "Dhaka":
            continue
        corp = mapping.get(region["thana"])
        if corp is None:
            unmapped.add(region["thana"])
            continue
        agg = per_corp[corp][row["period"]]
        agg["disease_news"] += row["disease_news"]
        agg["intervention_news"] += row["intervention_news"]
        agg["official_cases"] += row["official_cases"]

    def ratio(c: str) -> float | None:
        disease = sum(v["disease_news"] for v in per_corp[c].values())
        interv = sum(v["intervention_news"] for v in per_corp[c].values())
        return disease / interv if interv else None

    totals = {
        c: {
            "disease_news": sum(v["disease_news"] for v in per_corp[c].values()),
            "intervention_news": sum(v["intervention_news"] for v in per_corp[c].values()),
            "official_cases": sum(v["official_cases"] for v in per_corp[c].values()),
        }
        for c in corps
    }
    return {
        "mapping_version": mapping_version,
        "periods": {
            c: {p: dict(v) for p, v in sorted(per_corp[c].items())} for c in corps
        },
        "totals": totals,
        "disease_intervention_ratio": {c: ratio(c) for c in corps},
        "unmapped_thanas": sorted(unmapped),
    }
