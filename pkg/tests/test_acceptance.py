"""Acceptance suite: one test per shipping criterion, with runtime budgets.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion. Every expected value here is either trivially constructed or
computed by an independent oracle embedded in the test.
"""

import itertools
import math
import time
from fractions import Fraction
from math import comb

import numpy as np
import pytest
from fastapi.testclient import TestClient

from denguewatch import classify, synth, topics
from denguewatch.analytics import aggregate, compare_city_corporations, correlate, gap_rank
from denguewatch.corpus import CorpusStats, CorpusStore
from denguewatch.hitl import (
    DISEASE,
    INTERVENTION,
    BaselineScore,
    HitlStore,
    KeywordLexicon,
    baseline_score,
    bulk_pair_scores,
    demo_lexicon_path,
    load_lexicon_file,
    pair_scores,
)
from denguewatch.regions import load_thana_corporations
from denguewatch.serialize import canonical_json
from denguewatch.service import ApiConfig, create_app
from denguewatch.topics import LdaConfig


def report(name: str, t0: float, detail: str = "") -> None:
    print(f"\n[PASS] {name}: {detail} ({time.monotonic() - t0:.2f}s)")


# --------------------------------------------------------------------------
# C1: yearly stats render the published fixture percentages. Runtime < 1s.
# --------------------------------------------------------------------------


@pytest.mark.parametrize(
    "total,dengue,expected",
    [
        (48780, 950, "0.19%"),
        (1114701, 2262, "0.20%"),
        (1754361, 35796, "2.04%"),
    ],
)
def test_c1_yearly_stats_render(total, dengue, expected):
    t0 = time.monotonic()
    got = CorpusStats(year=2019, total_crawled=total, dengue_related=dengue).percent_display
    assert got == expected, (
        f"fixture row ({total}, {dengue}) renders {got}; the pinned expected string "
        f"{expected} is inconsistent with dengue/total = {dengue / total:.6%}"
    )
    assert time.monotonic() - t0 < 1.0
    report("C1 yearly-stats-render", t0, f"({total},{dengue}) -> {expected}")


# --------------------------------------------------------------------------
# C2: similarity scores match an independent brute-force implementation for
# every token-set pair with |union| <= 10 over a 12-token alphabet
# (cosine to 1e-12, jaccard exact). Runtime < 30s.
# --------------------------------------------------------------------------


def test_c2_similarity_exhaustive_oracle():
    t0 = time.monotonic()
    N = 12
    n_masks = 1 << N
    masks = np.arange(n_masks, dtype=np.int64)
    bitmat = ((masks[:, None] >> np.arange(N)) & 1).astype(np.int64)  # (4096, 12)
    sizes = bitmat.sum(axis=1)
    norms = np.sqrt(sizes.astype(np.float64))

    checked = 0
    max_cos_diff = 0.0
    for bmask in range(n_masks):
        nb = int(sizes[bmask])
        # production route: set-size arithmetic, vectorized over all doc masks
        inter = sizes[masks & bmask]  # popcount of the intersection mask
        cos_prod, jac_prod = bulk_pair_scores(sizes, np.full(n_masks, nb), inter)

        # independent oracle route: explicit binary vectors
        bvec = bitmat[bmask]
        dots = bitmat @ bvec
        either = np.maximum(bitmat, bvec).sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            cos_oracle = np.where(
                (sizes > 0) & (nb > 0), dots / (norms * math.sqrt(nb)), 0.0
            )
            jac_oracle = np.where(either > 0, dots / np.maximum(either, 1), 0.0)

        sel = (sizes + nb - inter) <= 10
        if not sel.any():
            continue
        checked += int(sel.sum())
        max_cos_diff = max(max_cos_diff, float(np.abs(cos_prod - cos_oracle)[sel].max()))
        assert np.array_equal(jac_prod[sel], jac_oracle[sel])

    expected_pairs = sum(comb(N, u) * 3**u for u in range(11))
    assert checked == expected_pairs == 14_120_011
    assert max_cos_diff <= 1e-12
    elapsed = time.monotonic() - t0
    assert elapsed < 30.0
    report("C2 similarity-exhaustive", t0, f"{checked:,} pairs, max cos diff {max_cos_diff:.2e}")


def test_c2b_scalar_api_equals_bulk_on_full_8_alphabet():
    t0 = time.monotonic()
    alphabet = [f"w{i}" for i in range(8)]
    subsets = [frozenset(c) for r in range(9) for c in itertools.combinations(alphabet, r)]
    checked = 0
    for keys in subsets:
        if not keys:
            continue
        nb = len(keys)
        for doc_set in subsets:
            cos_s, jac_s = pair_scores(doc_set, keys)
            cos_b, jac_b = bulk_pair_scores(
                np.array([len(doc_set)]), np.array([nb]), np.array([len(doc_set & keys)])
            )
            assert cos_s == cos_b[0] and jac_s == jac_b[0]
            checked += 1
    report("C2b scalar-vs-bulk", t0, f"{checked:,} pairs through the scalar API")


# --------------------------------------------------------------------------
# C3: threshold semantics. Ensemble exactly 0.5 does not queue; +1e-9 does.
# --------------------------------------------------------------------------


def test_c3_threshold_semantics(tmp_path, gazetteer):
    t0 = time.monotonic()
    exactly = BaselineScore("x", 0.5, 0.0, 0.5, 0.0, 0.5, 0.0)
    assert exactly.triggered == ()
    above = BaselineScore("x", 0.5, 0.0, 0.5, 0.0, 0.5 + 1e-9, 0.0)
    assert above.triggered == (DISEASE,)

    # end-to-end: a real doc with ensemble exactly 0.5 under the min combiner
    from denguewatch.corpus import TokenizedDoc
    from denguewatch.topics import SeedSet

    store = CorpusStore(tmp_path / "d", gazetteer)
    store.write_tokens(
        [
            TokenizedDoc("boundary", ("d1", "d2")),  # jaccard 2/4 = 0.5 exactly
            TokenizedDoc("above", ("d1", "d2", "d3")),
        ]
    )
    seeds = [
        SeedSet("infectious agent", ("d1", "d2", "d3", "d4")),
        SeedSet("reservoir", ("i1", "i2", "i3", "i4")),
    ]
    hitl = HitlStore(tmp_path / "d", seed_sets=seeds)
    lex = hitl.lexicon()
    s = baseline_score(store.tokenized_docs()[0], lex, combiner="min")
    assert s.ensemble_disease == 0.5
    queued = hitl.enqueue_for_review(store, combiner="min")
    ids = [p["doc_id"] for p in hitl.pending_docs()]
    assert "boundary" not in ids and "above" in ids and queued == 1
    report("C3 threshold-semantics", t0, "0.5 excluded, 0.5+1e-9 queued")


# --------------------------------------------------------------------------
# C4: planted-topic recovery. 200 docs, two disjoint 50-word vocabularies,
# one seed per topic, boost=100, rng 42: >= 95% purity and every planted
# correlate in its topic's top-10. Runtime < 60s.
# --------------------------------------------------------------------------


def test_c4_planted_topic_recovery():
    t0 = time.monotonic()
    pc = synth.planted_corpus(rng_seed=42, n_long_docs=200, n_short_docs=0)
    assert len(pc.docs) == 200
    cfg = LdaConfig(K=2, beta=0.01, boost=100.0, iterations=150, rng_seed=42)
    model = topics.fit(pc.docs, pc.seed_sets, cfg)
    side = np.array([pc.word_side(w) for w in model.vocab])
    purity = float((side[model.stream_word] == model.assignments).mean())
    assert purity >= 0.95
    for k in range(2):
        top10 = [t for t, _ in topics.top_words(model, k, 10)]
        for corr in pc.correlates[k]:
            assert corr in top10
    elapsed = time.monotonic() - t0
    assert elapsed < 60.0
    report("C4 planted-recovery", t0, f"purity {purity:.4f}")


# --------------------------------------------------------------------------
# C5: scripted end-to-end loop. Terminates within 3 iterations, the final
# lexicon is exactly seeds + planted correlates, and exported label counts
# equal the scripted decisions.
# --------------------------------------------------------------------------


def test_c5_hitl_loop_scripted_annotator(tmp_path, gazetteer):
    t0 = time.monotonic()
    pc = synth.planted_corpus(rng_seed=42)
    store = CorpusStore(tmp_path / "d", gazetteer)
    store.write_tokens(pc.docs)
    hitl = HitlStore(tmp_path / "d", seed_sets=pc.seed_sets)
    wanted = {
        "infectious agent": set(pc.correlates[0]),
        "reservoir": set(pc.correlates[1]),
    }

    iterations = 0
    while not hitl.terminated():
        iterations += 1
        assert iterations <= 3, "loop failed to terminate within 3 iterations"
        cfg = LdaConfig(K=2, beta=0.01, boost=100.0, iterations=150, rng_seed=42)
        model = topics.fit(store.tokenized_docs(), hitl.seed_sets(), cfg)
        candidates = topics.propose_candidates(model, hitl.lexicon().union, 5)
        hitl.set_candidates(candidates)
        accept = {
            sid: [t for t in toks if t in wanted.get(sid, ())]
            for sid, toks in candidates.items()
        }
        hitl.review_candidates(accept)

    final = hitl.lexicon()
    assert final.disease_keywords == {pc.seed_words[0]} | set(pc.correlates[0])
    assert final.intervention_keywords == {pc.seed_words[1]} | set(pc.correlates[1])

    queued = hitl.enqueue_for_review(store)
    assert queued == len(pc.short_doc_ids[0]) + len(pc.short_doc_ids[1])
    scripted = {0: DISEASE, 1: INTERVENTION}
    votes_cast = {DISEASE: 0, INTERVENTION: 0}
    for pending in list(hitl.pending_docs()):
        label = scripted[pc.doc_side[pending["doc_id"]]]
        hitl.record_votes(pending["doc_id"], [label] * 3)
        votes_cast[label] += 1
    counts = hitl.export_labeled(tmp_path / "labeled.jsonl")
    assert counts == votes_cast == {DISEASE: 15, INTERVENTION: 15}
    report("C5 hitl-loop", t0, f"{iterations} iterations, exported {counts}")


# --------------------------------------------------------------------------
# C6: classifier oracles. MNB posteriors to 1e-12 (exact-fraction oracle);
# KNN equals brute force on <= 200 points; SVM subgradient matches central
# finite differences to 1e-4 relative at non-margin probes; metrics equal
# the hand-computed confusion example.
# --------------------------------------------------------------------------


def test_c6_classifier_oracles():
    t0 = time.monotonic()

    # MNB: 4-doc corpus over vocab (a, b, c), smoothing 1
    X = np.array([[2, 1, 0], [1, 0, 0], [0, 1, 2], [0, 0, 1]])
    model = classify.train_mnb(X, [DISEASE, DISEASE, INTERVENTION, INTERVENTION])
    liks = {
        DISEASE: [Fraction(4, 7), Fraction(2, 7), Fraction(1, 7)],
        INTERVENTION: [Fraction(1, 7), Fraction(2, 7), Fraction(4, 7)],
    }
    for counts in itertools.product(range(4), repeat=3):
        score = {}
        for cls in (DISEASE, INTERVENTION):
            s = Fraction(1, 2)
            for j, c in enumerate(counts):
                s *= liks[cls][j] ** c
            score[cls] = s
        expected = float(score[DISEASE] / (score[DISEASE] + score[INTERVENTION]))
        got = model.posteriors(np.array([counts]))[0][0]
        assert abs(got - expected) < 1e-12

    # KNN vs exhaustive enumeration on 200 points
    rng = np.random.default_rng(21)
    Xk = rng.integers(0, 7, (200, 6)).astype(float)
    labels = [DISEASE if r < 0.5 else INTERVENTION for r in rng.random(200)]
    ids = [f"k{i:03d}" for i in range(200)]
    knn = classify.train_knn(Xk, labels, ids, k=5)
    for q in rng.integers(0, 7, (50, 6)).astype(float):
        xnorm = math.sqrt(float(q @ q))
        scored = []
        for i in range(200):
            rn = math.sqrt(float(Xk[i] @ Xk[i]))
            sim = float(Xk[i] @ q) / (rn * xnorm) if rn and xnorm else 0.0
            scored.append((1.0 - sim, ids[i], labels[i]))
        scored.sort(key=lambda s: (s[0], s[1]))
        d_votes = sum(1 for _, _, l in scored[:5] if l == DISEASE)
        expected = DISEASE if d_votes * 2 > 5 else INTERVENTION
        assert knn.predict(np.array([q]))[0] == expected

    # SVM subgradient vs central finite differences
    Xs = rng.integers(0, 5, (20, 7)).astype(float)
    y = np.where(rng.random(20) < 0.5, 1.0, -1.0)
    lam = 1e-2
    w = rng.normal(0, 0.1, 7)
    b = -0.07
    assert np.abs(y * (Xs @ w + b) - 1.0).min() > 1e-3
    gw, gb = classify.svm_subgradient(w, b, Xs, y, lam)
    h = 1e-6
    for j in range(7):
        wp, wm = w.copy(), w.copy()
        wp[j] += h
        wm[j] -= h
        fd = (
            classify.svm_objective(wp, b, Xs, y, lam)
            - classify.svm_objective(wm, b, Xs, y, lam)
        ) / (2 * h)
        assert abs(gw[j] - fd) <= 1e-4 * max(abs(gw[j]), abs(fd), 1e-6)
    fd_b = (
        classify.svm_objective(w, b + h, Xs, y, lam)
        - classify.svm_objective(w, b - h, Xs, y, lam)
    ) / (2 * h)
    assert abs(gb - fd_b) <= 1e-4 * max(abs(gb), abs(fd_b), 1e-6)

    # metrics from the hand confusion matrix
    m = classify.metrics_from_confusion([[50, 10], [5, 35]])
    assert m["accuracy"] == 0.85
    assert m["per_class"][DISEASE]["precision"] == 50 / 55
    assert m["per_class"][DISEASE]["recall"] == 50 / 60
    p_d, r_d = Fraction(50, 55), Fraction(50, 60)
    p_i, r_i = Fraction(35, 45), Fraction(35, 40)
    f1_d, f1_i = 2 * p_d * r_d / (p_d + r_d), 2 * p_i * r_i / (p_i + r_i)
    assert abs(m["f1_macro"] - float((f1_d + f1_i) / 2)) < 1e-12
    report("C6 classifier-oracles", t0, "mnb/knn/svm/metrics against embedded oracles")


# --------------------------------------------------------------------------
# C7: synthetic calibration corpus. 1550 docs (1045/505), 5-30 tokens, 20%
# cross-class noise, stratified 70/30 split at seed 42: SVM macro-F1 >= 0.85
# and SVM F1 >= MNB F1 - 0.05. Runtime < 2 min.
# --------------------------------------------------------------------------


def test_c7_synthetic_calibration():
    t0 = time.monotonic()
    lexicon = load_lexicon_file(demo_lexicon_path())
    assert len(lexicon.union) == 95
    docs, labels = synth.keyword_class_corpus(
        lexicon, n_disease=1045, n_intervention=505, noise=0.2, rng_seed=42
    )
    assert labels.count(DISEASE) == 1045 and labels.count(INTERVENTION) == 505
    assert all(5 <= len(d.tokens) <= 30 for d in docs)
    feats = classify.featurize(docs, lexicon)
    assert feats.X.shape == (1550, 95)
    recount = {}
    for d in docs:
        for t in d.tokens:
            recount[t] = recount.get(t, 0) + 1
    for j, tok in enumerate(feats.space.vocab):
        assert feats.X[:, j].sum() == recount.get(tok, 0)
    result = classify.evaluate(["mnb", "knn", "svm"], feats, labels, split_seed=42)
    svm_f1 = result["models"]["svm"]["f1_macro"]
    mnb_f1 = result["models"]["mnb"]["f1_macro"]
    assert svm_f1 >= 0.85
    assert svm_f1 >= mnb_f1 - 0.05
    elapsed = time.monotonic() - t0
    assert elapsed < 120.0
    report("C7 calibration", t0, f"svm f1 {svm_f1:.4f}, mnb f1 {mnb_f1:.4f}")


# --------------------------------------------------------------------------
# C8: analytics invariants. Roll-up conservation on a 500-doc fixture,
# Pearson r exactly 1 on affine series (1e-12), gap shares sum to 1 (1e-9),
# and the constructed gap/city fixtures flag exactly what they encode.
# --------------------------------------------------------------------------


def test_c8_analytics_conservation_and_fixtures(gazetteer):
    t0 = time.monotonic()
    docs, cases = synth.regional_fixture(500, rng_seed=7)
    district = aggregate(docs, cases, "district", gazetteer=gazetteer)
    division = aggregate(docs, cases, "division", gazetteer=gazetteer)
    country = aggregate(docs, cases, "country", gazetteer=gazetteer)
    for field in ("disease_news", "intervention_news", "official_cases"):
        sums = {}
        for row in district["rows"]:
            key = (row["region"]["division"], row["period"])
            sums[key] = sums.get(key, 0) + row[field]
        for row in division["rows"]:
            assert sums.get((row["region"]["division"], row["period"]), 0) == row[field]
        csums = {}
        for row in division["rows"]:
            csums[row["period"]] = csums.get(row["period"], 0) + row[field]
        for row in country["rows"]:
            assert csums.get(row["period"], 0) == row[field]

    base = {f"2019-{m:02d}": (m * 37) % 101 + m for m in range(1, 13)}
    for a, b in [(2, 7), (5, 0), (1, -3)]:
        out = correlate({p: a * v + b for p, v in base.items()}, base)
        assert abs(out["r"] - 1.0) <= 1e-12

    rep = gap_rank(district["rows"])
    for col in ("case_share", "disease_share", "intervention_share"):
        assert abs(sum(r[col] for r in rep["districts"]) - 1.0) <= 1e-9

    gdocs, gcases = synth.gap_fixture()
    gagg = aggregate(gdocs, gcases, "district", gazetteer=gazetteer)
    grep = gap_rank(gagg["rows"])
    flagged = {r["district"] for r in grep["districts"] if r["flagged"]}
    assert flagged == set(synth.GAP_FIXTURE_DISTRICTS)

    cdocs, ccases = synth.citycorp_fixture()
    cagg = aggregate(cdocs, ccases, "thana", division="Dhaka", gazetteer=gazetteer)
    comp = compare_city_corporations(cagg["rows"], load_thana_corporations())
    dncc, dscc = comp["totals"]["DNCC"], comp["totals"]["DSCC"]
    assert dscc["official_cases"] > dncc["official_cases"]
    assert dncc["intervention_news"] > dscc["intervention_news"]
    report("C8 analytics", t0, f"conservation + {len(flagged)} gap districts + city inversion")


# --------------------------------------------------------------------------
# C9: service equivalence. Every read endpoint byte-equals the CLI payload
# on the same store; vote-count and already-labeled are enforced; an
# idempotent retry replays without double effect.
# --------------------------------------------------------------------------


READ_SURFACES = [
    ("/api/stats?year=2019", ["stats", "--year", "2019"]),
    (
        "/api/aggregate?level=district&start=2019-01&end=2019-12&limit=50&offset=0",
        [
            "analytics", "aggregate", "--level", "district",
            "--from", "2019-01", "--to", "2019-12", "--limit", "50", "--offset", "0",
        ],
    ),
    ("/api/aggregate?level=country", ["analytics", "aggregate", "--level", "country"]),
    ("/api/correlation?lag=1", ["analytics", "correlate", "--lag", "1"]),
    (
        "/api/gaps?start=2019-01&end=2019-12",
        ["analytics", "gaps", "--from", "2019-01", "--to", "2019-12"],
    ),
    ("/api/citycorp", ["analytics", "citycorp"]),
    ("/api/lexicon", ["lexicon"]),
    ("/api/annotation/queue?limit=50&offset=0", ["hitl", "show-queue"]),
]


def test_c9_service_cli_equivalence(demo_store, capsys):
    t0 = time.monotonic()
    from denguewatch import cli

    client = TestClient(create_app(ApiConfig(data_dir=str(demo_store))))
    for url, argv in READ_SURFACES:
        resp = client.get(url)
        assert resp.status_code == 200, (url, resp.text)
        api_bytes = canonical_json(resp.json()["data"])
        rc = cli.main(["--data-dir", str(demo_store)] + argv)
        cli_bytes = capsys.readouterr().out.strip()
        assert rc == 0
        assert api_bytes == cli_bytes, f"payload mismatch for {url}"

    queue = client.get("/api/annotation/queue?limit=1").json()["data"]["docs"]
    doc_id = queue[0]["doc_id"]
    resp = client.post("/api/annotation/vote", json={"doc_id": doc_id, "votes": ["Disease"] * 2})
    assert resp.status_code == 422 and resp.json()["error"]["code"] == "VOTE_COUNT"

    body = {"doc_id": doc_id, "votes": ["Disease"] * 3, "request_id": "acc-retry"}
    first = client.post("/api/annotation/vote", json=body)
    assert first.status_code == 200
    labels_count = len(HitlStore(demo_store).labeled_docs())
    retry = client.post("/api/annotation/vote", json=body)
    assert retry.status_code == 200 and retry.json() == first.json()
    assert len(HitlStore(demo_store).labeled_docs()) == labels_count

    dup = client.post("/api/annotation/vote", json={"doc_id": doc_id, "votes": ["Disease"] * 3})
    assert dup.status_code == 409 and dup.json()["error"]["code"] == "ALREADY_LABELED"
    report("C9 service-equivalence", t0, f"{len(READ_SURFACES)} surfaces byte-identical")
