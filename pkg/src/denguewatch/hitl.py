"""Human-in-the-loop keyword expansion and two-class labeling.

The session state lives in three files under the data directory:

- ``lexicon.jsonl``   append-only rows ``{version, class, token, provenance}``;
  version v of the lexicon is the union of rows with version <= v.
- ``labels.jsonl``    one row per labeled document (immutable once written).
- ``hitl_state.json`` iteration counter, termination flag, pending queue,
  pending keyword candidates, and the working (extended) seed sets.

Documents queue for annotation when the cosine/Jaccard ensemble against
either keyword class is strictly greater than 0.5. Three votes decide a
label by majority. Reviewing keyword candidates bumps the lexicon version;
an iteration that accepts nothing terminates the session.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from filelock import FileLock

from .corpus import CorpusStore, TokenizedDoc
from .serialize import append_jsonl, atomic_write_text, canonical_json, load_json, read_jsonl
from .topics import CHAIN_OF_INFECTION_SETS, SeedSet, load_seed_sets

DISEASE = "Disease"
INTERVENTION = "Intervention"
CLASSES = (DISEASE, INTERVENTION)

DISEASE_SETS = ("infectious agent", "portal of exit", "portal of entry", "susceptible host")
INTERVENTION_SETS = ("reservoir", "means of transmission")

TRIGGER_THRESHOLD = 0.5  # strict: a score of exactly 0.5 does not trigger

LEXICON_FILE = "lexicon.jsonl"
LABELS_FILE = "labels.jsonl"
STATE_FILE = "hitl_state.json"


class HitlError(ValueError):
    code = "HITL_ERROR"


class VoteCountError(HitlError):
    code = "VOTE_COUNT"


class NotPendingError(HitlError):
    code = "NOT_PENDING"


class AlreadyLabeledError(HitlError):
    code = "ALREADY_LABELED"


class OppositeClassError(HitlError):
    code = "OPPOSITE_CLASS"


class UnknownCandidateError(HitlError):
    code = "UNKNOWN_CANDIDATE"


class SessionTerminatedError(HitlError):
    code = "SESSION_TERMINATED"


class EmptyLabelStoreError(HitlError):
    code = "EMPTY_LABELS"


def class_of_set(set_id: str) -> str:
    if set_id in DISEASE_SETS:
        return DISEASE
    if set_id in INTERVENTION_SETS:
        return INTERVENTION
    raise ValueError(f"unknown seed set id {set_id!r}")


# --------------------------------------------------------------------------
# Similarity scoring
# --------------------------------------------------------------------------


def pair_scores(doc_tokens: frozenset[str], keywords: frozenset[str]) -> tuple[float, float]:
    """(cosine, jaccard) between a document token set and a keyword set.

    Cosine is taken between binary presence vectors, which reduces to
    |A∩B| / sqrt(|A||B|); Jaccard is |A∩B| / |A∪B|. Either side empty
    scores 0 on both.
    """
    if not doc_tokens or not keywords:
        return 0.0, 0.0
    inter = len(doc_tokens & keywords)
    union = len(doc_tokens) + len(keywords) - inter
    cos = inter / math.sqrt(len(doc_tokens) * len(keywords))
    jac = inter / union
    return cos, jac


def bulk_pair_scores(
    doc_sizes: np.ndarray, key_sizes: np.ndarray, intersections: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized form of :func:`pair_scores` over parallel size arrays."""
    doc_sizes = np.asarray(doc_sizes, dtype=np.int64)
    key_sizes = np.asarray(key_sizes, dtype=np.int64)
    inter = np.asarray(intersections, dtype=np.int64)
    union = doc_sizes + key_sizes - inter
    nonzero = (doc_sizes > 0) & (key_sizes > 0)
    cos = np.zeros(doc_sizes.shape, dtype=np.float64)
    jac = np.zeros(doc_sizes.shape, dtype=np.float64)
    np.divide(inter, np.sqrt(doc_sizes * key_sizes), out=cos, where=nonzero)
    np.divide(inter, union, out=jac, where=nonzero & (union > 0))
    return cos, jac


def combine(cos: float, jac: float, combiner: str = "mean") -> float:
    if combiner == "mean":
        return (cos + jac) / 2.0
    if combiner == "max":
        return max(cos, jac)
    if combiner == "min":
        return min(cos, jac)
    raise ValueError(f"unknown combiner {combiner!r}")


@dataclass(frozen=True)
class BaselineScore:
    doc_id: str
    cosine_disease: float
    cosine_intervention: float
    jaccard_disease: float
    jaccard_intervention: float
    ensemble_disease: float
    ensemble_intervention: float

    @property
    def triggered(self) -> tuple[str, ...]:
        out = []
        if self.ensemble_disease > TRIGGER_THRESHOLD:
            out.append(DISEASE)
        if self.ensemble_intervention > TRIGGER_THRESHOLD:
            out.append(INTERVENTION)
        return tuple(out)

    @property
    def max_ensemble(self) -> float:
        return max(self.ensemble_disease, self.ensemble_intervention)

    def as_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "cosine_disease": self.cosine_disease,
            "cosine_intervention": self.cosine_intervention,
            "jaccard_disease": self.jaccard_disease,
            "jaccard_intervention": self.jaccard_intervention,
            "ensemble_disease": self.ensemble_disease,
            "ensemble_intervention": self.ensemble_intervention,
            "triggered": list(self.triggered),
        }


@dataclass(frozen=True)
class KeywordLexicon:
    version: int
    disease_keywords: frozenset[str]
    intervention_keywords: frozenset[str]
    provenance: dict  # token -> "seed" | "lda-accepted@<version>"

    def __post_init__(self):
        overlap = self.disease_keywords & self.intervention_keywords
        if overlap:
            raise ValueError(f"keyword classes overlap: {sorted(overlap)}")

    @property
    def union(self) -> frozenset[str]:
        return self.disease_keywords | self.intervention_keywords

    def keywords_for(self, cls: str) -> frozenset[str]:
        if cls == DISEASE:
            return self.disease_keywords
        if cls == INTERVENTION:
            return self.intervention_keywords
        raise ValueError(f"unknown class {cls!r}")

    def as_dict(self) -> dict:
        return {
            "version": self.version,
            "disease_keywords": sorted(self.disease_keywords),
            "intervention_keywords": sorted(self.intervention_keywords),
            "provenance": dict(sorted(self.provenance.items())),
        }

    @classmethod
    def from_seed_sets(cls, seed_sets: list[SeedSet]) -> "KeywordLexicon":
        disease, intervention, prov = set(), set(), {}
        for s in seed_sets:
            target = disease if class_of_set(s.set_id) == DISEASE else intervention
            for w in s.words:
                target.add(w)
                prov[w] = "seed"
        return cls(0, frozenset(disease), frozenset(intervention), prov)


def baseline_score(
    doc: TokenizedDoc, lexicon: KeywordLexicon, combiner: str = "mean"
) -> BaselineScore:
    if not lexicon.disease_keywords or not lexicon.intervention_keywords:
        raise ValueError("lexicon must be non-empty on both classes")
    toks = doc.token_set
    cos_d, jac_d = pair_scores(toks, lexicon.disease_keywords)
    cos_i, jac_i = pair_scores(toks, lexicon.intervention_keywords)
    return BaselineScore(
        doc_id=doc.doc_id,
        cosine_disease=cos_d,
        cosine_intervention=cos_i,
        jaccard_disease=jac_d,
        jaccard_intervention=jac_i,
        ensemble_disease=combine(cos_d, jac_d, combiner),
        ensemble_intervention=combine(cos_i, jac_i, combiner),
    )


def load_lexicon_file(path: Path | str, version: int | None = None) -> KeywordLexicon:
    """Read a lexicon file (rows: version, class, token, provenance)."""
    rows = [r for _, r in read_jsonl(path)]
    max_version = max((r["version"] for r in rows), default=0)
    version = max_version if version is None else int(version)
    disease, intervention, prov = set(), set(), {}
    for r in rows:
        if r["version"] > version:
            continue
        (disease if r["class"] == DISEASE else intervention).add(r["token"])
        prov[r["token"]] = r["provenance"]
    return KeywordLexicon(version, frozenset(disease), frozenset(intervention), prov)


def demo_lexicon_path() -> Path:
    from importlib import resources

    return Path(str(resources.files("denguewatch").joinpath("data/demo_lexicon.jsonl")))


@dataclass(frozen=True)
class LabeledDoc:
    doc_id: str
    label: str
    votes: tuple[str, str, str]
    iteration: int

    @property
    def decided_by(self) -> str:
        return "unanimous" if len(set(self.votes)) == 1 else "majority"

    def as_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "label": self.label,
            "votes": list(self.votes),
            "iteration": self.iteration,
        }


# --------------------------------------------------------------------------
# Session store
# --------------------------------------------------------------------------


class HitlStore:
    """Annotation session rooted at a data directory.

    Mutations take a file lock and rewrite state atomically, so concurrent
    voters are serialized and readers always see a consistent snapshot.
    """

    def __init__(self, data_dir: Path | str, seed_sets: list[SeedSet] | None = None):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._lock = FileLock(str(self.data_dir / ".hitl.lock"))
        if not self.state_path.exists():
            self._init_state(seed_sets or load_seed_sets())

    @property
    def state_path(self) -> Path:
        return self.data_dir / STATE_FILE

    @property
    def lexicon_path(self) -> Path:
        return self.data_dir / LEXICON_FILE

    @property
    def labels_path(self) -> Path:
        return self.data_dir / LABELS_FILE

    def _init_state(self, seed_sets: list[SeedSet]) -> None:
        with self._lock:
            if self.state_path.exists():
                return
            rows = []
            for s in seed_sets:
                cls = class_of_set(s.set_id)
                for w in s.words:
                    rows.append(
                        {"version": 0, "class": cls, "token": w, "provenance": "seed"}
                    )
            atomic_write_text(
                self.lexicon_path, "".join(canonical_json(r) + "\n" for r in rows)
            )
            state = {
                "iteration": 0,
                "terminated": False,
                "pending_docs": [],
                "pending_candidates": {},
                "seed_sets": {s.set_id: list(s.words) for s in seed_sets},
            }
            atomic_write_text(self.state_path, canonical_json(state))

    # -- state helpers -------------------------------------------------------

    def _state(self) -> dict:
        return load_json(self.state_path)

    def _save_state(self, state: dict) -> None:
        atomic_write_text(self.state_path, canonical_json(state))

    def seed_sets(self) -> list[SeedSet]:
        state = self._state()
        return [
            SeedSet(sid, tuple(state["seed_sets"][sid]))
            for sid in CHAIN_OF_INFECTION_SETS
            if sid in state["seed_sets"]
        ]

    def iteration(self) -> int:
        return int(self._state()["iteration"])

    def terminated(self) -> bool:
        return bool(self._state()["terminated"])

    # -- lexicon -------------------------------------------------------------

    def lexicon(self, version: int | None = None) -> KeywordLexicon:
        current = self.iteration()
        version = current if version is None else int(version)
        if version < 0 or version > current:
            raise ValueError(f"lexicon version {version} does not exist (current {current})")
        disease, intervention, prov = set(), set(), {}
        if self.lexicon_path.exists():
            for _, row in read_jsonl(self.lexicon_path):
                if row["version"] > version:
                    continue
                (disease if row["class"] == DISEASE else intervention).add(row["token"])
                prov[row["token"]] = row["provenance"]
        return KeywordLexicon(version, frozenset(disease), frozenset(intervention), prov)

    # -- labels ----------------------------------------------------------------

    def labeled_docs(self) -> list[LabeledDoc]:
        if not self.labels_path.exists():
            return []
        return [
            LabeledDoc(r["doc_id"], r["label"], tuple(r["votes"]), r["iteration"])
            for _, r in read_jsonl(self.labels_path)
        ]

    def labeled_ids(self) -> set[str]:
        return {d.doc_id for d in self.labeled_docs()}

    # -- operations ------------------------------------------------------------

    def score_all(
        self, corpus: CorpusStore, combiner: str = "mean"
    ) -> list[BaselineScore]:
        lexicon = self.lexicon()
        docs = corpus.tokenized_docs()
        return [baseline_score(d, lexicon, combiner) for d in docs]

    def enqueue_for_review(self, corpus: CorpusStore, combiner: str = "mean") -> int:
        """Queue every unlabeled doc whose ensemble exceeds the threshold.

        Ordered by max ensemble descending (ties by doc id); each doc enters
        at most once and labeled docs never re-enter.
        """
        with self._lock:
            state = self._state()
            labeled = self.labeled_ids()
            scores = self.score_all(corpus, combiner)
            pending = [
                s for s in scores if s.doc_id not in labeled and s.triggered
            ]
            pending.sort(key=lambda s: (-s.max_ensemble, s.doc_id))
            state["pending_docs"] = [s.as_dict() for s in pending]
            self._save_state(state)
            return len(pending)

    def pending_docs(self, limit: int | None = None, offset: int = 0) -> list[dict]:
        rows = self._state()["pending_docs"]
        end = None if limit is None else offset + limit
        return rows[offset:end]

    def record_votes(self, doc_id: str, votes: list[str] | tuple[str, ...]) -> LabeledDoc:
        votes = tuple(votes)
        if len(votes) != 3 or any(v not in CLASSES for v in votes):
            raise VoteCountError(
                f"exactly 3 votes from {CLASSES} required, got {list(votes)!r}"
            )
        with self._lock:
            state = self._state()
            if doc_id in self.labeled_ids():
                raise AlreadyLabeledError(f"doc {doc_id!r} is already labeled")
            pending_ids = [p["doc_id"] for p in state["pending_docs"]]
            if doc_id not in pending_ids:
                raise NotPendingError(f"doc {doc_id!r} is not in the annotation queue")
            label = DISEASE if votes.count(DISEASE) >= 2 else INTERVENTION
            doc = LabeledDoc(doc_id, label, votes, int(state["iteration"]))
            append_jsonl(self.labels_path, [doc.as_dict()])
            state["pending_docs"] = [
                p for p in state["pending_docs"] if p["doc_id"] != doc_id
            ]
            self._save_state(state)
            return doc

    def set_candidates(self, candidates: dict[str, list[str]]) -> None:
        with self._lock:
            state = self._state()
            if state["terminated"]:
                raise SessionTerminatedError("session is terminated; no further iterations")
            unknown = set(candidates) - set(state["seed_sets"])
            if unknown:
                raise UnknownCandidateError(f"candidates reference unknown seed sets {sorted(unknown)}")
            state["pending_candidates"] = {k: list(v) for k, v in candidates.items()}
            self._save_state(state)

    def pending_candidates(self) -> dict[str, list[str]]:
        return self._state()["pending_candidates"]

    def review_candidates(self, accept: dict[str, list[str]]) -> KeywordLexicon:
        """Apply accept/reject decisions for the pending candidates.

        ``accept`` maps set_id -> tokens to accept into that set; every other
        pending candidate is rejected. Accepting zero candidates terminates
        the session. Returns the lexicon version now in force.
        """
        with self._lock:
            state = self._state()
            if state["terminated"]:
                raise SessionTerminatedError("session is terminated")
            pending = state["pending_candidates"]
            lexicon = self.lexicon(int(state["iteration"]))
            new_version = int(state["iteration"]) + 1
            rows = []
            accepted_count = 0
            for set_id, tokens in accept.items():
                if set_id not in state["seed_sets"]:
                    raise UnknownCandidateError(f"unknown seed set {set_id!r}")
                cls = class_of_set(set_id)
                opposite = (
                    lexicon.intervention_keywords if cls == DISEASE else lexicon.disease_keywords
                )
                for token in tokens:
                    if token not in pending.get(set_id, []):
                        raise UnknownCandidateError(
                            f"{token!r} is not a pending candidate for {set_id!r}"
                        )
                    if token in opposite:
                        raise OppositeClassError(
                            f"{token!r} already belongs to the opposite class"
                        )
                    if token in lexicon.union:
                        continue  # already present on the same side; nothing to add
                    rows.append(
                        {
                            "version": new_version,
                            "class": cls,
                            "token": token,
                            "provenance": f"lda-accepted@{new_version}",
                        }
                    )
                    state["seed_sets"][set_id].append(token)
                    accepted_count += 1
            if rows:
                append_jsonl(self.lexicon_path, rows)
            state["iteration"] = new_version
            state["pending_candidates"] = {}
            if accepted_count == 0:
                state["terminated"] = True
            self._save_state(state)
            return self.lexicon(new_version)

    def export_labeled(self, path: Path | str) -> dict[str, int]:
        docs = self.labeled_docs()
        if not docs:
            raise EmptyLabelStoreError("no labeled documents to export")
        atomic_write_text(
            path, "".join(canonical_json(d.as_dict()) + "\n" for d in docs)
        )
        return {
            DISEASE: sum(1 for d in docs if d.label == DISEASE),
            INTERVENTION: sum(1 for d in docs if d.label == INTERVENTION),
        }

    def import_labeled(self, path: Path | str) -> int:
        """Load an exported label file into this (fresh) session's store."""
        rows = [r for _, r in read_jsonl(path)]
        with self._lock:
            existing = self.labeled_ids()
            dup = existing & {r["doc_id"] for r in rows}
            if dup:
                raise AlreadyLabeledError(f"docs already labeled: {sorted(dup)[:5]}")
            append_jsonl(self.labels_path, rows)
        return len(rows)

    def metrics(self, corpus: CorpusStore, combiner: str = "mean") -> dict:
        """Operator-facing counters: labeled volume and baseline agreement."""
        labeled = self.labeled_docs()
        lexicon = self.lexicon()
        by_id = {d.doc_id: d for d in corpus.tokenized_docs()}
        agree = 0
        scored = 0
        for ld in labeled:
            doc = by_id.get(ld.doc_id)
            if doc is None:
                continue
            s = baseline_score(doc, lexicon, combiner)
            scored += 1
            guess = DISEASE if s.ensemble_disease >= s.ensemble_intervention else INTERVENTION
            if guess == ld.label:
                agree += 1
        return {
            "labeled_count": len(labeled),
            "baseline_agreement": (agree / scored) if scored else None,
            "lexicon_version": lexicon.version,
            "terminated": self.terminated(),
        }
