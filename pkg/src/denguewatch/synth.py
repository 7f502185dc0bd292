"""Deterministic synthetic data: planted-topic corpora, keyword-generated
labeled corpora, regional fixtures, and a full demo data directory.

Everything here is seeded; the same seed always reproduces the same corpus.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import CorpusStore, NewsRecord, TokenizedDoc
from .hitl import DISEASE, INTERVENTION, HitlStore, KeywordLexicon
from .regions import Gazetteer, RegionRef
from .serialize import canonical_json
from .topics import SeedSet

# Accepted-keyword fixture: the set each expansion word lands in. Mirrors
# data/demo_lexicon.jsonl (version 1, provenance lda-accepted@1).
ACCEPTED_BY_SET: dict[str, tuple[str, ...]] = {
    "infectious agent": (
        "fever", "hemorrhagic", "outbreak", "infection", "epidemic", "febrile",
        "strain", "antigen",
    ),
    "portal of exit": ("transfusion", "bleeding", "hemorrhage", "platelet"),
    "portal of entry": ("rash", "lesion", "membrane", "tissue"),
    "susceptible host": (
        "hospital", "ward", "admission", "icu", "death", "diagnosis", "symptom",
        "physician", "clinic", "toddler", "mother", "family", "neighborhood",
        "victim", "casualty", "recovery", "treatment", "paracetamol", "saline",
        "test", "kit", "fatality",
    ),
    "reservoir": (
        "garbage", "waste", "dump", "stagnant", "puddle", "rooftop", "basement",
        "flowerpot", "gutter", "canal",
    ),
    "means of transmission": (
        "spray", "fogging", "larvicide", "repellent", "net", "cleanup", "campaign",
        "drive", "inspection", "fine", "awareness", "leaflet",
    ),
}


# --------------------------------------------------------------------------
# Planted two-topic corpus
# --------------------------------------------------------------------------


@dataclass
class PlantedCorpus:
    docs: list[TokenizedDoc]
    seed_sets: list[SeedSet]
    seed_words: tuple[str, str]
    correlates: tuple[tuple[str, ...], tuple[str, ...]]
    vocab_sides: tuple[tuple[str, ...], tuple[str, ...]]
    doc_side: dict[str, int]  # doc_id -> planted topic
    short_doc_ids: tuple[tuple[str, ...], tuple[str, ...]]

    def word_side(self, token: str) -> int:
        return 0 if token in set(self.vocab_sides[0]) else 1


def planted_corpus(
    rng_seed: int = 42,
    n_long_docs: int = 200,
    n_short_docs: int = 30,
    vocab_size: int = 50,
    n_correlates: int = 3,
) -> PlantedCorpus:
    """Two disjoint 50-word vocabularies with one seed and 3 correlates each.

    Long docs (40-80 tokens) carry the topic signal for the sampler; short
    keyword-dense docs exist so the annotation queue has something above the
    ensemble threshold once the correlates are accepted.
    """
    rng = np.random.default_rng(rng_seed)
    sides = (
        tuple(f"alpha{i:02d}" for i in range(vocab_size)),
        tuple(f"beta{i:02d}" for i in range(vocab_size)),
    )
    seed_words = (sides[0][0], sides[1][0])
    correlates = (
        tuple(sides[0][1 : 1 + n_correlates]),
        tuple(sides[1][1 : 1 + n_correlates]),
    )
    # Sampling weights: seed 0.10, correlates 0.08 each, rest uniform.
    weights = np.full(vocab_size, 0.0)
    weights[0] = 0.10
    weights[1 : 1 + n_correlates] = 0.08
    weights[1 + n_correlates :] = (1.0 - 0.10 - 0.08 * n_correlates) / (
        vocab_size - 1 - n_correlates
    )

    docs: list[TokenizedDoc] = []
    doc_side: dict[str, int] = {}
    for i in range(n_long_docs):
        side = i % 2
        length = int(rng.integers(40, 81))
        toks = tuple(str(t) for t in rng.choice(sides[side], size=length, p=weights))
        doc_id = f"planted-{i:04d}"
        docs.append(TokenizedDoc(doc_id, toks))
        doc_side[doc_id] = side

    shorts: tuple[list[str], list[str]] = ([], [])
    for i in range(n_short_docs):
        side = i % 2
        filler = sides[side][1 + n_correlates + int(rng.integers(0, vocab_size - 1 - n_correlates))]
        toks = (seed_words[side],) + correlates[side] + (filler,)
        doc_id = f"planted-short-{i:04d}"
        docs.append(TokenizedDoc(doc_id, toks))
        doc_side[doc_id] = side
        shorts[side].append(doc_id)

    seed_sets = [
        SeedSet("infectious agent", (seed_words[0],)),
        SeedSet("reservoir", (seed_words[1],)),
    ]
    return PlantedCorpus(
        docs=docs,
        seed_sets=seed_sets,
        seed_words=seed_words,
        correlates=correlates,
        vocab_sides=sides,
        doc_side=doc_side,
        short_doc_ids=(tuple(shorts[0]), tuple(shorts[1])),
    )


# --------------------------------------------------------------------------
# Keyword-generated labeled corpus (classifier calibration)
# --------------------------------------------------------------------------


def keyword_class_corpus(
    lexicon: KeywordLexicon,
    n_disease: int = 1045,
    n_intervention: int = 505,
    noise: float = 0.2,
    rng_seed: int = 42,
    min_len: int = 5,
    max_len: int = 30,
) -> tuple[list[TokenizedDoc], list[str]]:
    """Docs of 5-30 tokens sampled from class keyword distributions.

    Each token comes from the doc's own class with probability 1-noise and
    from the other class otherwise. Keyword draw weights decay harmonically
    over the sorted keyword list so frequencies are realistic, not flat.
    """
    rng = np.random.default_rng(rng_seed)

    def dist(words: frozenset[str]) -> tuple[np.ndarray, np.ndarray]:
        ordered = np.array(sorted(words))
        w = 1.0 / np.arange(1, len(ordered) + 1)
        return ordered, w / w.sum()

    vocab_d, p_d = dist(lexicon.disease_keywords)
    vocab_i, p_i = dist(lexicon.intervention_keywords)

    docs: list[TokenizedDoc] = []
    labels: list[str] = []
    plan = [(DISEASE, n_disease), (INTERVENTION, n_intervention)]
    counter = 0
    for label, count in plan:
        own, p_own = (vocab_d, p_d) if label == DISEASE else (vocab_i, p_i)
        other, p_other = (vocab_i, p_i) if label == DISEASE else (vocab_d, p_d)
        for _ in range(count):
            length = int(rng.integers(min_len, max_len + 1))
            from_other = rng.random(length) < noise
            toks = [
                str(rng.choice(other, p=p_other))
                if flip
                else str(rng.choice(own, p=p_own))
                for flip in from_other
            ]
            docs.append(TokenizedDoc(f"syn-{counter:05d}", tuple(toks)))
            labels.append(label)
            counter += 1
    return docs, labels


# --------------------------------------------------------------------------
# Regional fixtures
# --------------------------------------------------------------------------


def regional_fixture(
    n_docs: int = 500, rng_seed: int = 7, year: int = 2019
) -> tuple[list, list]:
    """Fully geotagged classified docs plus case records across all districts."""
    from .analytics import CaseRecord, ClassifiedDoc

    gaz = Gazetteer.load()
    districts = sorted(gaz.district_division.items(), key=lambda kv: kv[1] + kv[0])
    rng = np.random.default_rng(rng_seed)
    docs = []
    for i in range(n_docs):
        name, division = districts[int(rng.integers(0, len(districts)))]
        month = int(rng.integers(1, 13))
        label = DISEASE if rng.random() < 0.65 else INTERVENTION
        docs.append(
            ClassifiedDoc(
                f"fix-{i:04d}",
                label,
                dt.date(year, month, int(rng.integers(1, 28))),
                RegionRef(division, name),
            )
        )
    cases = []
    for name, division in districts:
        for month in range(1, 13):
            count = int(rng.integers(0, 200))
            cases.append(
                CaseRecord(dt.date(year, month, 15), RegionRef(division, name), count, "IEDCR")
            )
    return docs, cases


GAP_FIXTURE_DISTRICTS = (
    "Bagerhat", "Bandarban", "Chapainawabganj", "Feni", "Joypurhat",
    "Lakshmipur", "Munshiganj", "Natore", "Netrokona", "Rangamati",
)

HUB_DISTRICTS = (
    "Dhaka", "Chittagong", "Sylhet", "Rajshahi", "Khulna", "Barishal",
    "Rangpur", "Mymensingh",
)


def gap_fixture(year: int = 2019) -> tuple[list, list]:
    """Constructed so exactly GAP_FIXTURE_DISTRICTS out-rank the hubs.

    Gap districts: many cases, almost no intervention news. Hubs: many cases
    and proportionally generous intervention coverage.
    """
    from .analytics import CaseRecord, ClassifiedDoc

    gaz = Gazetteer.load()
    docs = []
    cases = []
    counter = 0

    def add_news(district: str, label: str, n: int, month: int = 8):
        nonlocal counter
        division = gaz.district_division[district]
        for _ in range(n):
            docs.append(
                ClassifiedDoc(
                    f"gapfix-{counter:05d}",
                    label,
                    dt.date(year, month, 10),
                    RegionRef(division, district),
                )
            )
            counter += 1

    for district in GAP_FIXTURE_DISTRICTS:
        division = gaz.district_division[district]
        cases.append(CaseRecord(dt.date(year, 8, 15), RegionRef(division, district), 500, "IEDCR"))
        add_news(district, DISEASE, 20)
        add_news(district, INTERVENTION, 1)
    for district in HUB_DISTRICTS:
        division = gaz.district_division[district]
        cases.append(CaseRecord(dt.date(year, 8, 15), RegionRef(division, district), 1000, "IEDCR"))
        add_news(district, DISEASE, 100)
        add_news(district, INTERVENTION, 50)
    return docs, cases


def citycorp_fixture(year: int = 2019) -> tuple[list, list]:
    """DSCC has twice the cases; DNCC has twice the intervention news."""
    from .analytics import CaseRecord, ClassifiedDoc

    dncc_thanas = ("Gulshan", "Mirpur")
    dscc_thanas = ("Dhanmondi", "Jatrabari")
    docs = []
    cases = []
    counter = 0

    def add(thanas, disease_n, interv_n, cases_n):
        nonlocal counter
        for thana in thanas:
            region = RegionRef("Dhaka", "Dhaka", thana)
            cases.append(CaseRecord(dt.date(year, 8, 15), region, cases_n, "IEDCR"))
            for label, n in ((DISEASE, disease_n), (INTERVENTION, interv_n)):
                for _ in range(n):
                    docs.append(
                        ClassifiedDoc(
                            f"ccfix-{counter:05d}", label, dt.date(year, 8, 10), region
                        )
                    )
                    counter += 1

    add(dncc_thanas, disease_n=15, interv_n=20, cases_n=200)  # DNCC: 40 intervention
    add(dscc_thanas, disease_n=30, interv_n=10, cases_n=400)  # DSCC: 800 cases
    return docs, cases


# --------------------------------------------------------------------------
# Demo data directory
# --------------------------------------------------------------------------


def build_demo_data(data_dir: Path | str, rng_seed: int = 42, scale: float = 0.2) -> dict:
    """Populate a data directory end-to-end for the service and web UI.

    Runs the real flows: ingest, normalize, a lexicon review that installs
    the expansion fixture, predictions, case ingestion, and the annotation
    queue.
    """
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(rng_seed)
    gaz = Gazetteer.load()
    store = CorpusStore(data_dir, gaz)
    hitl = HitlStore(data_dir)

    lexicon = hitl.lexicon()
    accepted = {k: list(v) for k, v in ACCEPTED_BY_SET.items()}
    hitl.set_candidates(accepted)
    lexicon = hitl.review_candidates(accepted)

    n_d, n_i = int(1045 * scale), int(505 * scale)
    docs, labels = keyword_class_corpus(lexicon, n_d, n_i, rng_seed=rng_seed)

    districts = sorted(gaz.district_division.items())
    records = []
    for doc, label in zip(docs, labels):
        district, division = districts[int(rng.integers(0, len(districts)))]
        year = int(rng.choice([2017, 2018, 2019], p=[0.15, 0.25, 0.6]))
        month = int(rng.integers(1, 13))
        day = int(rng.integers(1, 28))
        toks = list(doc.tokens)
        records.append(
            {
                "id": doc.doc_id,
                "url": f"https://news.example.bd/{doc.doc_id}",
                "source_domain": f"paper{int(rng.integers(0, 40)):02d}.example.bd",
                "published_on": dt.date(year, month, day).isoformat(),
                "title": " ".join(toks[:4]),
                "body": " ".join(toks[4:]) or toks[0],
                "region": {"division": gaz.district_division[district], "district": district},
            }
        )

    # A few keyword-dense docs so the annotation queue is non-empty.
    disease_sorted = sorted(lexicon.disease_keywords)
    interv_sorted = sorted(lexicon.intervention_keywords)
    queue_docs = []
    for i in range(6):
        words = disease_sorted if i % 2 == 0 else interv_sorted
        toks = [str(t) for t in rng.choice(words, size=min(35, len(words)), replace=False)]
        queue_docs.append(
            {
                "id": f"queue-{i:03d}",
                "url": f"https://news.example.bd/queue-{i:03d}",
                "source_domain": "paper00.example.bd",
                "published_on": "2019-08-15",
                "title": " ".join(toks[:4]),
                "body": " ".join(toks[4:]),
                "region": {"division": "Dhaka", "district": "Dhaka"},
            }
        )

    corpus_file = data_dir / "demo_corpus.jsonl"
    with open(corpus_file, "w", encoding="utf-8") as f:
        for r in records + queue_docs:
            f.write(canonical_json(r) + "\n")
    report = store.ingest_file(corpus_file)
    store.normalize_all(frozenset())

    from .serialize import write_jsonl

    write_jsonl(
        data_dir / "predictions.jsonl",
        [
            {"doc_id": d.doc_id, "label": label, "kind": "synthetic"}
            for d, label in zip(docs, labels)
        ],
    )

    cases_csv = data_dir / "demo_cases.csv"
    with open(cases_csv, "w", encoding="utf-8") as f:
        f.write("date,division,district,thana,cases,source\n")
        for district, division in districts:
            for year in (2017, 2018, 2019):
                for month in range(1, 13):
                    base = {2017: 5, 2018: 8, 2019: 40}[year]
                    count = int(rng.integers(0, base * (3 if month in (7, 8, 9) else 1) + 1))
                    f.write(f"{year}-{month:02d}-15,{division},{district},,{count},IEDCR\n")
        mapping_thanas = ("Gulshan", "Mirpur", "Dhanmondi", "Jatrabari")
        for thana in mapping_thanas:
            for month in range(1, 13):
                count = int(rng.integers(5, 80))
                f.write(f"2019-{month:02d}-15,Dhaka,Dhaka,{thana},{count},IEDCR\n")
    from .analytics import CaseStore

    case_report = CaseStore(data_dir, gaz).ingest_file(cases_csv)
    queued = hitl.enqueue_for_review(store)
    return {
        "ingested": report.accepted,
        "cases": case_report["accepted"],
        "queued": queued,
        "lexicon_version": lexicon.version,
    }
