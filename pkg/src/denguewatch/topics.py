"""Seed-guided LDA over tokenized news, fitted by collapsed Gibbs sampling.

Seeding uses an asymmetric topic-word prior: a seed word bound to topic k
gets its prior multiplied by ``boost`` in that topic only, so related
vocabulary gravitates toward the seeded topics. Seed-word occurrences are
also initialized in their bound topic, since the prior boost alone cannot
outweigh counts once they accumulate on the wrong topic. The first
``len(seed_sets)`` topic indices are bound 1:1 to the seed sets, in order.

Fitting is deterministic given the config's ``rng_seed``: documents are
canonicalized by id before the token stream is built, initial assignments
and per-sweep uniforms come from one seeded generator, and the sweep kernels
(see ``kernels``) consume those uniforms in stream order.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import kernels
from .corpus import TokenizedDoc
from .serialize import atomic_write_text, load_json

CHAIN_OF_INFECTION_SETS = (
    "infectious agent",
    "reservoir",
    "portal of exit",
    "means of transmission",
    "portal of entry",
    "susceptible host",
)

MODEL_FORMAT = "denguewatch-topic-model"
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class SeedSet:
    set_id: str
    words: tuple[str, ...]

    def __post_init__(self):
        if self.set_id not in CHAIN_OF_INFECTION_SETS:
            raise ValueError(f"unknown seed set id {self.set_id!r}")


def load_seed_sets(path: Path | str | None = None) -> list[SeedSet]:
    """The six chain-of-infection seed sets, in canonical order."""
    if path is None:
        raw = json.loads(
            resources.files("denguewatch").joinpath("data/seed_words.json").read_text("utf-8")
        )
    else:
        raw = load_json(path)
    if set(raw) != set(CHAIN_OF_INFECTION_SETS):
        raise ValueError("seed file must define exactly the six chain-of-infection sets")
    sets = [SeedSet(sid, tuple(raw[sid])) for sid in CHAIN_OF_INFECTION_SETS]
    seen: set[str] = set()
    for s in sets:
        dup = seen & set(s.words)
        if dup:
            raise ValueError(f"seed word(s) {sorted(dup)} appear in more than one set")
        seen |= set(s.words)
    return sets


@dataclass(frozen=True)
class LdaConfig:
    K: int = 12
    alpha: float | None = None  # defaults to 50/K
    beta: float = 0.01
    boost: float = 50.0
    iterations: int = 500
    rng_seed: int = 42

    @property
    def alpha_value(self) -> float:
        return 50.0 / self.K if self.alpha is None else self.alpha

    def validate(self) -> None:
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.alpha_value <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if self.boost < 1:
            raise ValueError("boost must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")

    def as_dict(self) -> dict:
        return {
            "K": self.K,
            "alpha": self.alpha,
            "beta": self.beta,
            "boost": self.boost,
            "iterations": self.iterations,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LdaConfig":
        return cls(**{k: d[k] for k in ("K", "alpha", "beta", "boost", "iterations", "rng_seed") if k in d})


@dataclass
class TopicModel:
    config: LdaConfig
    seed_sets: list[SeedSet]
    vocab: tuple[str, ...]
    doc_ids: tuple[str, ...]
    doc_lengths: np.ndarray  # int32 (D,)
    stream_word: np.ndarray  # int32 (N,) vocab index per token position
    assignments: np.ndarray  # int32 (N,) topic per token position
    doc_topic_counts: np.ndarray = field(default=None)  # int64 (D,K)
    topic_word_counts: np.ndarray = field(default=None)  # int64 (K,V)
    topic_totals: np.ndarray = field(default=None)  # int64 (K,)
    loglik_trace: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.doc_topic_counts is None:
            self.rebuild_counts()

    @property
    def stream_doc(self) -> np.ndarray:
        return np.repeat(
            np.arange(len(self.doc_ids), dtype=np.int32), self.doc_lengths
        ).astype(np.int32)

    def rebuild_counts(self) -> None:
        D, K, V = len(self.doc_ids), self.config.K, len(self.vocab)
        doc_topic = np.zeros((D, K), dtype=np.int64)
        topic_word = np.zeros((K, V), dtype=np.int64)
        np.add.at(doc_topic, (self.stream_doc, self.assignments), 1)
        np.add.at(topic_word, (self.assignments, self.stream_word), 1)
        self.doc_topic_counts = doc_topic
        self.topic_word_counts = topic_word
        self.topic_totals = topic_word.sum(axis=1)

    def verify_counts(self) -> None:
        """Counts must be exactly reconstructible from assignments."""
        dt, tw, tt = self.doc_topic_counts, self.topic_word_counts, self.topic_totals
        self.rebuild_counts()
        if not (
            np.array_equal(dt, self.doc_topic_counts)
            and np.array_equal(tw, self.topic_word_counts)
            and np.array_equal(tt, self.topic_totals)
        ):
            raise AssertionError("count matrices inconsistent with assignments")
        n = int(self.doc_lengths.sum())
        if int(self.doc_topic_counts.sum()) != n or int(self.topic_word_counts.sum()) != n:
            raise AssertionError("count marginals do not equal token count")

    # -- priors --------------------------------------------------------------

    def seed_topic_of_word(self) -> np.ndarray:
        """Vocab-indexed bound topic (or -1). A word belongs to at most one set."""
        index = {w: i for i, w in enumerate(self.vocab)}
        out = np.full(len(self.vocab), -1, dtype=np.int32)
        for k, s in enumerate(self.seed_sets):
            for w in s.words:
                j = index.get(w)
                if j is not None:
                    out[j] = k
        return out

    def beta_row(self, topic: int) -> np.ndarray:
        beta = self.config.beta
        row = np.full(len(self.vocab), beta)
        st = self.seed_topic_of_word()
        row[st == topic] = beta * self.config.boost
        return row

    def beta_sums(self) -> np.ndarray:
        beta, boost = self.config.beta, self.config.boost
        sums = np.full(self.config.K, beta * len(self.vocab))
        st = self.seed_topic_of_word()
        for k in range(self.config.K):
            sums[k] += (boost - 1.0) * beta * int((st == k).sum())
        return sums

    # -- queries --------------------------------------------------------------

    def topic_word_probs(self, topic: int) -> np.ndarray:
        if not 0 <= topic < self.config.K:
            raise ValueError(f"topic {topic} out of range [0, {self.config.K})")
        num = self.topic_word_counts[topic] + self.beta_row(topic)
        return num / (self.topic_totals[topic] + self.beta_sums()[topic])

    def log_likelihood(self) -> float:
        """Smoothed per-token predictive log-likelihood (monitoring trace only)."""
        alpha = self.config.alpha_value
        theta = (self.doc_topic_counts + alpha) / (
            self.doc_topic_counts.sum(axis=1, keepdims=True) + alpha * self.config.K
        )
        beta_m = np.stack([self.beta_row(k) for k in range(self.config.K)])
        phi = (self.topic_word_counts + beta_m) / (
            (self.topic_totals + self.beta_sums())[:, None]
        )
        probs = np.einsum("dk,kn->dn", theta, phi)  # D x V
        ll = 0.0
        sd = self.stream_doc
        for i in range(len(self.stream_word)):
            ll += float(np.log(probs[sd[i], self.stream_word[i]]))
        return ll


def fit(
    docs: list[TokenizedDoc],
    seed_sets: list[SeedSet] | None,
    config: LdaConfig,
    trace: bool = False,
) -> TopicModel:
    """Run collapsed Gibbs sampling for ``config.iterations`` sweeps.

    Document input order is immaterial: docs are canonicalized by id, so
    permuting the corpus yields the same model for the same seed.
    """
    config.validate()
    if not docs:
        raise ValueError("corpus is empty")
    seed_sets = list(seed_sets or [])
    if len({s.set_id for s in seed_sets}) != len(seed_sets):
        raise ValueError("duplicate seed set ids")
    if config.K < len(seed_sets):
        raise ValueError(f"K={config.K} is smaller than the number of seed sets ({len(seed_sets)})")
    seen_words: set[str] = set()
    for s in seed_sets:
        dup = seen_words & set(s.words)
        if dup:
            raise ValueError(f"seed word(s) {sorted(dup)} appear in more than one set")
        seen_words |= set(s.words)

    docs = sorted(docs, key=lambda d: d.doc_id)
    if len({d.doc_id for d in docs}) != len(docs):
        raise ValueError("duplicate doc ids in corpus")
    vocab = tuple(sorted({t for d in docs for t in d.tokens}))
    index = {w: i for i, w in enumerate(vocab)}
    if seed_sets and not (seen_words & set(vocab)):
        warnings.warn("no seed word occurs in the corpus vocabulary; seeding has no effect")

    doc_ids = tuple(d.doc_id for d in docs)
    doc_lengths = np.array([len(d.tokens) for d in docs], dtype=np.int32)
    stream_word = np.fromiter(
        (index[t] for d in docs for t in d.tokens), dtype=np.int32, count=int(doc_lengths.sum())
    )
    stream_doc = np.repeat(np.arange(len(docs), dtype=np.int32), doc_lengths).astype(np.int32)

    rng = np.random.default_rng(config.rng_seed)
    assignments = rng.integers(0, config.K, size=stream_word.shape[0]).astype(np.int32)
    # Anchor the seeding: occurrences of a seed word start in their bound
    # topic; the prior boost alone cannot outweigh accumulated counts.
    if seed_sets:
        bound = np.full(len(vocab), -1, dtype=np.int32)
        for k, s in enumerate(seed_sets):
            for w in s.words:
                if w in index:
                    bound[index[w]] = k
        seeded_positions = bound[stream_word] >= 0
        assignments[seeded_positions] = bound[stream_word][seeded_positions]

    model = TopicModel(
        config=config,
        seed_sets=seed_sets,
        vocab=vocab,
        doc_ids=doc_ids,
        doc_lengths=doc_lengths,
        stream_word=stream_word,
        assignments=assignments,
    )
    seed_topic = model.seed_topic_of_word()
    beta_sums = model.beta_sums()

    for _ in range(config.iterations):
        uniforms = rng.random(stream_word.shape[0])
        kernels.gibbs_sweep(
            stream_doc,
            stream_word,
            model.assignments,
            model.doc_topic_counts,
            model.topic_word_counts,
            model.topic_totals,
            config.alpha_value,
            config.beta,
            config.boost,
            seed_topic,
            beta_sums,
            uniforms,
        )
        if trace:
            model.loglik_trace.append(model.log_likelihood())

    model.verify_counts()
    return model


def top_words(model: TopicModel, topic: int, n: int) -> list[tuple[str, float]]:
    """Tokens by smoothed topic-word probability, descending; ties lexicographic."""
    if n < 1:
        raise ValueError("n must be >= 1")
    probs = model.topic_word_probs(topic)
    order = sorted(range(len(model.vocab)), key=lambda j: (-probs[j], model.vocab[j]))
    return [(model.vocab[j], float(probs[j])) for j in order[:n]]


def propose_candidates(
    model: TopicModel,
    lexicon_tokens: frozenset[str] | set[str],
    n: int,
) -> dict[str, list[str]]:
    """Top-n new words per seeded topic: the queue a human reviews.

    Words already in any seed set or in the lexicon are excluded; an empty
    list for every set is the loop's termination signal.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    exclude = set(lexicon_tokens)
    for s in model.seed_sets:
        exclude |= set(s.words)
    out: dict[str, list[str]] = {}
    for k, s in enumerate(model.seed_sets):
        if n == 0:
            out[s.set_id] = []
            continue
        ranked = top_words(model, k, len(model.vocab))
        out[s.set_id] = [w for w, _ in ranked if w not in exclude][:n]
    return out


def save_model(model: TopicModel, path: Path | str) -> None:
    payload = {
        "format": MODEL_FORMAT,
        "format_version": MODEL_FORMAT_VERSION,
        "config": model.config.as_dict(),
        "seed_sets": [{"set_id": s.set_id, "words": list(s.words)} for s in model.seed_sets],
        "vocab": list(model.vocab),
        "doc_ids": list(model.doc_ids),
        "doc_lengths": model.doc_lengths.tolist(),
        "word_stream": model.stream_word.tolist(),
        "assignments": model.assignments.tolist(),
    }
    atomic_write_text(path, json.dumps(payload, ensure_ascii=False))


def load_model(path: Path | str) -> TopicModel:
    payload = load_json(path)
    if payload.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a topic model file")
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported model format version")
    model = TopicModel(
        config=LdaConfig.from_dict(payload["config"]),
        seed_sets=[SeedSet(s["set_id"], tuple(s["words"])) for s in payload["seed_sets"]],
        vocab=tuple(payload["vocab"]),
        doc_ids=tuple(payload["doc_ids"]),
        doc_lengths=np.array(payload["doc_lengths"], dtype=np.int32),
        stream_word=np.array(payload["word_stream"], dtype=np.int32),
        assignments=np.array(payload["assignments"], dtype=np.int32),
    )
    model.verify_counts()
    return model
