import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from denguewatch.corpus import CorpusStore, TokenizedDoc
from denguewatch.hitl import (
    DISEASE,
    INTERVENTION,
    AlreadyLabeledError,
    BaselineScore,
    EmptyLabelStoreError,
    HitlStore,
    KeywordLexicon,
    NotPendingError,
    OppositeClassError,
    SessionTerminatedError,
    UnknownCandidateError,
    VoteCountError,
    baseline_score,
    bulk_pair_scores,
    class_of_set,
    load_lexicon_file,
    pair_scores,
)
from denguewatch.topics import SeedSet, load_seed_sets


def oracle_scores(doc: set, keys: set) -> tuple[float, float]:
    """Independent route: explicit binary vectors over the union vocabulary."""
    union = sorted(doc | keys)
    a = [1 if t in doc else 0 for t in union]
    b = [1 if t in keys else 0 for t in union]
    dot = sum(x * y for x, y in zip(a, b))
    na, nb = math.sqrt(sum(a)), math.sqrt(sum(b))
    cos = dot / (na * nb) if na > 0 and nb > 0 else 0.0
    either = sum(1 for x, y in zip(a, b) if x or y)
    jac = dot / either if either else 0.0
    return cos, jac


def simple_lexicon(disease=("d1", "d2", "d3", "d4"), intervention=("i1", "i2", "i3", "i4")):
    return KeywordLexicon(
        0,
        frozenset(disease),
        frozenset(intervention),
        {t: "seed" for t in (*disease, *intervention)},
    )


class TestPairScores:
    def test_identity(self):
        lex = simple_lexicon()
        doc = TokenizedDoc("x", ("d1", "d2", "d3", "d4"))
        s = baseline_score(doc, lex)
        assert (s.cosine_disease, s.jaccard_disease, s.ensemble_disease) == (1.0, 1.0, 1.0)
        assert s.triggered == (DISEASE,)

    def test_disjoint(self):
        lex = simple_lexicon()
        doc = TokenizedDoc("x", ("z1", "z2"))
        s = baseline_score(doc, lex)
        assert s.max_ensemble == 0.0 and s.triggered == ()

    def test_hand_case(self):
        # doc {a,b,c} vs keys {a,b,d,e}: jaccard 2/5, cosine 2/sqrt(12)
        cos, jac = pair_scores(frozenset("abc"), frozenset("abde"))
        assert jac == 0.4
        assert abs(cos - 2 / math.sqrt(12)) < 1e-15
        ens = (cos + jac) / 2
        assert abs(ens - 0.4886751345948129) < 1e-12
        assert ens < 0.5  # not triggered

    def test_empty_doc(self):
        lex = simple_lexicon()
        s = baseline_score(TokenizedDoc("x", ()), lex)
        assert s.max_ensemble == 0.0 and s.triggered == ()

    def test_empty_lexicon_side_rejected(self):
        lex = KeywordLexicon(0, frozenset(["a"]), frozenset(), {"a": "seed"})
        with pytest.raises(ValueError, match="non-empty"):
            baseline_score(TokenizedDoc("x", ("a",)), lex)

    def test_exhaustive_small_alphabet_vs_oracle(self):
        # every (doc, keys) pair over a 6-token alphabet, through the real API
        alphabet = ["t0", "t1", "t2", "t3", "t4", "t5"]
        subsets = []
        for r in range(len(alphabet) + 1):
            subsets.extend(frozenset(c) for c in itertools.combinations(alphabet, r))
        for keys in subsets:
            if not keys:
                continue
            lex = KeywordLexicon(0, keys, frozenset(["other"]), {})
            for doc_set in subsets:
                s = baseline_score(TokenizedDoc("x", tuple(doc_set)), lex)
                cos, jac = oracle_scores(set(doc_set), set(keys))
                assert s.jaccard_disease == jac
                assert abs(s.cosine_disease - cos) <= 1e-12

    @settings(max_examples=200, deadline=None)
    @given(
        st.frozensets(st.sampled_from("abcdefghijkl"), max_size=12),
        st.frozensets(st.sampled_from("abcdefghijkl"), max_size=12),
    )
    def test_bounds_property(self, doc, keys):
        cos, jac = pair_scores(doc, keys)
        assert 0.0 <= cos <= 1.0 + 1e-15
        assert 0.0 <= jac <= 1.0

    def test_bulk_matches_scalar(self):
        import numpy as np

        docs = [frozenset("ab"), frozenset(), frozenset("abcde"), frozenset("xy")]
        keys = frozenset("abcq")
        sizes = np.array([len(d) for d in docs])
        inters = np.array([len(d & keys) for d in docs])
        cos_b, jac_b = bulk_pair_scores(sizes, np.full(len(docs), len(keys)), inters)
        for i, d in enumerate(docs):
            cos_s, jac_s = pair_scores(d, keys)
            assert cos_b[i] == cos_s and jac_b[i] == jac_s


class TestThreshold:
    def test_exactly_half_does_not_trigger(self):
        s = BaselineScore("x", 0.5, 0.0, 0.5, 0.0, 0.5, 0.0)
        assert s.triggered == ()

    def test_epsilon_above_triggers(self):
        s = BaselineScore("x", 0.5, 0.0, 0.5, 0.0, 0.5 + 1e-9, 0.0)
        assert s.triggered == (DISEASE,)

    def test_real_doc_exact_half_min_combiner(self):
        # |doc|=2 subset of 4 keywords: jaccard = 2/4 = 0.5 exactly, cosine > 0.5
        lex = simple_lexicon()
        doc = TokenizedDoc("x", ("d1", "d2"))
        s = baseline_score(doc, lex, combiner="min")
        assert s.ensemble_disease == 0.5
        assert s.triggered == ()


def make_corpus_store(tmp_path, docs, gazetteer):
    store = CorpusStore(tmp_path / "data", gazetteer)
    store.write_tokens(docs)
    return store


@pytest.fixture
def queue_setup(tmp_path, gazetteer):
    """20 docs, exactly 7 above the ensemble threshold for some class."""
    hot = [
        TokenizedDoc("hot-00", ("d1", "d2", "d3", "d4")),  # ensemble 1.0
        TokenizedDoc("hot-01", ("d1", "d2", "d3", "d4", "x1")),
        TokenizedDoc("hot-02", ("d1", "d2", "d3", "d4", "x2")),
        TokenizedDoc("hot-03", ("i1", "i2", "i3", "i4", "x3")),
        TokenizedDoc("hot-04", ("i1", "i2", "i3", "i4", "x4")),
        TokenizedDoc("hot-05", ("d2", "d3", "d4", "x5")),
        TokenizedDoc("both-06", ("d1", "d2", "d3", "d4", "i1", "i2", "i3", "i4")),
    ]
    cold = [
        TokenizedDoc(f"cold-{i:02d}", ("d1", f"z{i}a", f"z{i}b", f"z{i}c", f"z{i}d"))
        for i in range(13)
    ]
    docs = hot + cold
    corpus = make_corpus_store(tmp_path, docs, gazetteer)
    seeds = [
        SeedSet("infectious agent", ("d1", "d2", "d3", "d4")),
        SeedSet("reservoir", ("i1", "i2", "i3", "i4")),
    ]
    hitl = HitlStore(tmp_path / "data", seed_sets=seeds)
    return corpus, hitl, docs


class TestQueue:
    def test_seven_of_twenty_in_score_order(self, queue_setup):
        corpus, hitl, docs = queue_setup
        n = hitl.enqueue_for_review(corpus)
        assert n == 7
        lex = hitl.lexicon()
        # independent recount through the vector oracle
        expected = []
        for d in docs:
            cos_d, jac_d = oracle_scores(set(d.tokens), set(lex.disease_keywords))
            cos_i, jac_i = oracle_scores(set(d.tokens), set(lex.intervention_keywords))
            ens = max((cos_d + jac_d) / 2, (cos_i + jac_i) / 2)
            if ens > 0.5:
                expected.append((d.doc_id, ens))
        expected.sort(key=lambda t: (-t[1], t[0]))
        got = [p["doc_id"] for p in hitl.pending_docs()]
        assert got == [doc_id for doc_id, _ in expected]

    def test_both_classes_queued_once(self, queue_setup):
        corpus, hitl, _ = queue_setup
        hitl.enqueue_for_review(corpus)
        rows = [p for p in hitl.pending_docs() if p["doc_id"] == "both-06"]
        assert len(rows) == 1
        assert rows[0]["triggered"] == [DISEASE, INTERVENTION]

    def test_no_doc_above_threshold(self, tmp_path, gazetteer):
        docs = [TokenizedDoc("a", ("z1", "z2"))]
        corpus = make_corpus_store(tmp_path, docs, gazetteer)
        hitl = HitlStore(tmp_path / "data")
        assert hitl.enqueue_for_review(corpus) == 0

    def test_labeled_docs_never_reenter(self, queue_setup):
        corpus, hitl, _ = queue_setup
        hitl.enqueue_for_review(corpus)
        hitl.record_votes("hot-00", [DISEASE] * 3)
        hitl.enqueue_for_review(corpus)
        assert "hot-00" not in [p["doc_id"] for p in hitl.pending_docs()]


class TestVotes:
    @pytest.mark.parametrize(
        "votes,label,decided",
        [
            ((DISEASE, DISEASE, DISEASE), DISEASE, "unanimous"),
            ((DISEASE, INTERVENTION, DISEASE), DISEASE, "majority"),
            ((INTERVENTION, INTERVENTION, DISEASE), INTERVENTION, "majority"),
        ],
    )
    def test_majority(self, queue_setup, votes, label, decided):
        corpus, hitl, _ = queue_setup
        hitl.enqueue_for_review(corpus)
        doc = hitl.record_votes("hot-01", votes)
        assert doc.label == label and doc.decided_by == decided

    def test_vote_count_enforced(self, queue_setup):
        corpus, hitl, _ = queue_setup
        hitl.enqueue_for_review(corpus)
        with pytest.raises(VoteCountError):
            hitl.record_votes("hot-01", [DISEASE, DISEASE])
        with pytest.raises(VoteCountError):
            hitl.record_votes("hot-01", [DISEASE] * 4)
        with pytest.raises(VoteCountError):
            hitl.record_votes("hot-01", [DISEASE, DISEASE, "Nope"])

    def test_not_pending_and_already_labeled(self, queue_setup):
        corpus, hitl, _ = queue_setup
        hitl.enqueue_for_review(corpus)
        with pytest.raises(NotPendingError):
            hitl.record_votes("cold-00", [DISEASE] * 3)
        hitl.record_votes("hot-00", [DISEASE] * 3)
        with pytest.raises(AlreadyLabeledError):
            hitl.record_votes("hot-00", [INTERVENTION] * 3)

    def test_persisted_immediately(self, queue_setup, tmp_path):
        corpus, hitl, _ = queue_setup
        hitl.enqueue_for_review(corpus)
        hitl.record_votes("hot-02", [INTERVENTION] * 3)
        fresh = HitlStore(tmp_path / "data")
        assert "hot-02" in fresh.labeled_ids()


class TestLexiconReview:
    def test_seed_partition_fixture(self):
        seeds = load_seed_sets()
        lex = KeywordLexicon.from_seed_sets(seeds)
        assert len(lex.union) == 35
        assert len(lex.disease_keywords) == 21
        assert len(lex.intervention_keywords) == 14
        for s in seeds:
            side = lex.disease_keywords if class_of_set(s.set_id) == DISEASE else lex.intervention_keywords
            assert set(s.words) <= side
        assert all(p == "seed" for p in lex.provenance.values())

    def test_accept_subset_grows_exactly(self, tmp_path):
        hitl = HitlStore(tmp_path / "d")
        cands = {"infectious agent": [f"n{i}" for i in range(6)], "reservoir": ["m0", "m1", "m2", "m3"]}
        hitl.set_candidates(cands)
        before = hitl.lexicon()
        new = hitl.review_candidates(
            {"infectious agent": ["n0", "n1", "n2"], "reservoir": ["m0", "m1"]}
        )
        assert new.version == 1
        assert len(new.union) == len(before.union) + 5
        assert new.provenance["n0"] == "lda-accepted@1"
        assert not hitl.terminated()

    def test_reject_all_terminates(self, tmp_path):
        hitl = HitlStore(tmp_path / "d")
        hitl.set_candidates({"infectious agent": ["n0"]})
        before = hitl.lexicon()
        new = hitl.review_candidates({})
        assert new.version == 1
        assert new.union == before.union
        assert hitl.terminated()
        with pytest.raises(SessionTerminatedError):
            hitl.set_candidates({"infectious agent": ["n1"]})
        with pytest.raises(SessionTerminatedError):
            hitl.review_candidates({})

    def test_opposite_class_rejected(self, tmp_path):
        hitl = HitlStore(tmp_path / "d")
        # "drain" is an Intervention seed; proposing it for a Disease set fails
        hitl.set_candidates({"infectious agent": ["drain"]})
        with pytest.raises(OppositeClassError):
            hitl.review_candidates({"infectious agent": ["drain"]})

    def test_unknown_candidate(self, tmp_path):
        hitl = HitlStore(tmp_path / "d")
        hitl.set_candidates({"infectious agent": ["n0"]})
        with pytest.raises(UnknownCandidateError):
            hitl.review_candidates({"infectious agent": ["never-proposed"]})
        with pytest.raises(UnknownCandidateError):
            hitl.review_candidates({"not a set": ["n0"]})

    def test_versions_monotone_and_disjoint(self, tmp_path):
        hitl = HitlStore(tmp_path / "d")
        hitl.set_candidates({"infectious agent": ["n0", "n1"]})
        hitl.review_candidates({"infectious agent": ["n0", "n1"]})
        hitl.set_candidates({"reservoir": ["m0"]})
        hitl.review_candidates({"reservoir": ["m0"]})
        v0, v1, v2 = (hitl.lexicon(v) for v in (0, 1, 2))
        assert v0.union < v1.union < v2.union
        for lex in (v0, v1, v2):
            assert not lex.disease_keywords & lex.intervention_keywords
        assert hitl.lexicon().version == 2
        with pytest.raises(ValueError, match="does not exist"):
            hitl.lexicon(3)

    def test_extended_sets_feed_next_iteration(self, tmp_path):
        hitl = HitlStore(tmp_path / "d")
        hitl.set_candidates({"susceptible host": ["newhost"]})
        hitl.review_candidates({"susceptible host": ["newhost"]})
        sets = {s.set_id: s.words for s in hitl.seed_sets()}
        assert "newhost" in sets["susceptible host"]


class TestExport:
    def test_export_counts_and_round_trip(self, queue_setup, tmp_path):
        corpus, hitl, _ = queue_setup
        hitl.enqueue_for_review(corpus)
        hitl.record_votes("hot-00", [DISEASE] * 3)
        hitl.record_votes("hot-03", [INTERVENTION, INTERVENTION, DISEASE])
        out = tmp_path / "labeled.jsonl"
        counts = hitl.export_labeled(out)
        assert counts == {DISEASE: 1, INTERVENTION: 1}
        assert len(out.read_text().strip().splitlines()) == 2
        fresh = HitlStore(tmp_path / "fresh")
        assert fresh.import_labeled(out) == 2
        assert {d.doc_id: d.label for d in fresh.labeled_docs()} == {
            d.doc_id: d.label for d in hitl.labeled_docs()
        }

    def test_empty_export_rejected(self, tmp_path):
        hitl = HitlStore(tmp_path / "d")
        with pytest.raises(EmptyLabelStoreError):
            hitl.export_labeled(tmp_path / "nope.jsonl")


class TestLexiconFile:
    def test_demo_lexicon_fixture_shape(self):
        from denguewatch.hitl import demo_lexicon_path

        lex = load_lexicon_file(demo_lexicon_path())
        assert lex.version == 1
        assert len(lex.union) == 95
        assert len(lex.disease_keywords) == 59
        assert len(lex.intervention_keywords) == 36
        v0 = load_lexicon_file(demo_lexicon_path(), version=0)
        assert len(v0.union) == 35
        assert v0.union < lex.union

    def test_review_reproduces_demo_fixture(self, tmp_path):
        from denguewatch.hitl import demo_lexicon_path
        from denguewatch.synth import ACCEPTED_BY_SET

        hitl = HitlStore(tmp_path / "d")
        hitl.set_candidates({k: list(v) for k, v in ACCEPTED_BY_SET.items()})
        produced = hitl.review_candidates({k: list(v) for k, v in ACCEPTED_BY_SET.items()})
        shipped = load_lexicon_file(demo_lexicon_path())
        assert produced.disease_keywords == shipped.disease_keywords
        assert produced.intervention_keywords == shipped.intervention_keywords
        assert produced.provenance == shipped.provenance
