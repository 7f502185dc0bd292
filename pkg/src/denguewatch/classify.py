"""Keyword-restricted count features and three from-scratch classifiers.

The feature space is exactly the final keyword lexicon union in lexicographic
order; no other token ever receives a column. Models:

- Multinomial Naive Bayes with additive smoothing.
- k-nearest-neighbours under cosine distance (k odd, so 2-class majority is
  always strict).
- One-vs-rest linear SVMs trained by Pegasos-style stochastic subgradient
  descent on ``lam/2 (||w||^2 + b^2) + mean hinge``, with the bias riding as
  a regularized constant feature; a binary mode trains the single
  Disease-vs-Intervention scorer. Both per-class runs consume the same
  pre-drawn epoch permutations, so with two classes the one-vs-rest pair is
  exactly sign-symmetric and agrees with the binary argmax.

Degenerate inputs are decided, not dropped: MNB ties and all-zero KNN
queries fall back to Disease / the training majority, and those rules are
part of the model contract.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .corpus import TokenizedDoc
from .hitl import CLASSES, DISEASE, INTERVENTION, KeywordLexicon
from .serialize import atomic_write_text, canonical_json, load_json

MODEL_FORMAT = "denguewatch-classifier"
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class FeatureSpace:
    vocab: tuple[str, ...]

    @property
    def index(self) -> dict[str, int]:
        return {w: j for j, w in enumerate(self.vocab)}

    @property
    def sha256(self) -> str:
        return hashlib.sha256(canonical_json(list(self.vocab)).encode("utf-8")).hexdigest()

    @classmethod
    def from_lexicon(cls, lexicon: KeywordLexicon) -> "FeatureSpace":
        if not lexicon.union:
            raise ValueError("lexicon is empty; no feature space")
        return cls(tuple(sorted(lexicon.union)))


@dataclass
class Featurized:
    space: FeatureSpace
    doc_ids: list[str]
    X: np.ndarray  # (n_docs, V) int64 counts
    zero_doc_ids: list[str] = field(default_factory=list)


def featurize(docs: list[TokenizedDoc], lexicon: KeywordLexicon) -> Featurized:
    """Count-vectorize docs over the lexicon vocabulary; flag all-zero rows."""
    space = FeatureSpace.from_lexicon(lexicon)
    index = space.index
    X = np.zeros((len(docs), len(space.vocab)), dtype=np.int64)
    doc_ids = []
    for i, doc in enumerate(docs):
        doc_ids.append(doc.doc_id)
        for tok in doc.tokens:
            j = index.get(tok)
            if j is not None:
                X[i, j] += 1
    zero = [doc_ids[i] for i in range(len(docs)) if not X[i].any()]
    return Featurized(space=space, doc_ids=doc_ids, X=X, zero_doc_ids=zero)


def _labels_to_codes(labels: list[str]) -> np.ndarray:
    codes = np.array([CLASSES.index(l) for l in labels], dtype=np.int64)
    return codes


# --------------------------------------------------------------------------
# Multinomial Naive Bayes
# --------------------------------------------------------------------------


@dataclass
class MnbModel:
    log_priors: np.ndarray  # (2,)
    log_likelihoods: np.ndarray  # (2, V)
    smoothing: float
    feature_space_sha256: str

    def scores(self, X: np.ndarray) -> np.ndarray:
        """Per-class log scores, shape (n, 2)."""
        X = np.atleast_2d(X)
        return self.log_priors[None, :] + X @ self.log_likelihoods.T

    def posteriors(self, X: np.ndarray) -> np.ndarray:
        s = self.scores(X)
        s = s - s.max(axis=1, keepdims=True)
        e = np.exp(s)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, X: np.ndarray) -> list[str]:
        # argmax take-first resolves exact ties to Disease
        return [CLASSES[i] for i in np.argmax(self.scores(X), axis=1)]


def train_mnb(X: np.ndarray, labels: list[str], smoothing: float = 1.0) -> MnbModel:
    if smoothing <= 0:
        raise ValueError("smoothing must be positive")
    codes = _labels_to_codes(labels)
    if len(set(codes.tolist())) < 2:
        raise ValueError("training set must contain both classes")
    V = X.shape[1]
    log_priors = np.empty(2)
    log_lik = np.empty((2, V))
    for c in range(2):
        mask = codes == c
        log_priors[c] = np.log(mask.sum() / len(codes))
        counts = X[mask].sum(axis=0).astype(np.float64)
        log_lik[c] = np.log((counts + smoothing) / (counts.sum() + smoothing * V))
    model = MnbModel(log_priors, log_lik, smoothing, "")
    for c in range(2):
        total = float(np.exp(model.log_likelihoods[c]).sum())
        if abs(total - 1.0) > 1e-9:
            raise AssertionError(f"class {CLASSES[c]} likelihoods sum to {total}, not 1")
    return model


# --------------------------------------------------------------------------
# k-nearest-neighbours, cosine distance
# --------------------------------------------------------------------------


@dataclass
class KnnModel:
    X: np.ndarray
    labels: list[str]
    doc_ids: list[str]
    k: int
    feature_space_sha256: str

    def _majority(self) -> str:
        d = self.labels.count(DISEASE)
        return DISEASE if d >= len(self.labels) - d else INTERVENTION

    def predict_one(self, x: np.ndarray) -> str:
        xnorm = float(np.sqrt(x @ x))
        if xnorm == 0.0:
            return self._majority()
        norms = np.sqrt((self.X * self.X).sum(axis=1))
        sims = np.zeros(len(self.labels))
        nz = norms > 0
        sims[nz] = (self.X[nz] @ x) / (norms[nz] * xnorm)
        dists = 1.0 - sims
        order = sorted(range(len(self.labels)), key=lambda i: (dists[i], self.doc_ids[i]))
        top = order[: self.k]
        d_votes = sum(1 for i in top if self.labels[i] == DISEASE)
        return DISEASE if d_votes * 2 > self.k else INTERVENTION

    def predict(self, X: np.ndarray) -> list[str]:
        return [self.predict_one(x) for x in np.atleast_2d(X)]


def train_knn(
    X: np.ndarray, labels: list[str], doc_ids: list[str], k: int = 5
) -> KnnModel:
    if k < 1 or k % 2 == 0:
        raise ValueError("k must be a positive odd integer (strict majority)")
    if k > len(labels):
        raise ValueError(f"k={k} exceeds training set size {len(labels)}")
    _labels_to_codes(labels)  # validates label values
    return KnnModel(X.astype(np.float64), list(labels), list(doc_ids), k, "")


# --------------------------------------------------------------------------
# Linear SVM, hinge loss, stochastic subgradient
# --------------------------------------------------------------------------


def svm_objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, lam: float) -> float:
    """lam/2 (||w||^2 + b^2) + mean hinge. The bias rides as a regularized
    constant feature, which keeps the 1/(lam*t) SGD schedule stable."""
    margins = y * (X @ w + b)
    hinge = np.maximum(0.0, 1.0 - margins)
    return 0.5 * lam * (float(w @ w) + b * b) + float(hinge.mean())


def svm_subgradient(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, lam: float
) -> tuple[np.ndarray, float]:
    margins = y * (X @ w + b)
    active = margins < 1.0
    gw = lam * w - (y[active, None] * X[active]).sum(axis=0) / len(y)
    gb = lam * b - float(y[active].sum()) / len(y)
    return gw, gb


@dataclass
class SvmModel:
    mode: str  # "ovr" | "binary"
    weights: np.ndarray  # (n_scorers, V)
    biases: np.ndarray  # (n_scorers,)
    lam: float
    epochs: int
    rng_seed: int
    feature_space_sha256: str

    def margin_scores(self, X: np.ndarray) -> np.ndarray:
        return np.atleast_2d(X).astype(np.float64) @ self.weights.T + self.biases[None, :]

    def predict(self, X: np.ndarray) -> list[str]:
        s = self.margin_scores(X)
        if self.mode == "binary":
            return [DISEASE if v >= 0 else INTERVENTION for v in s[:, 0]]
        return [CLASSES[i] for i in np.argmax(s, axis=1)]


def train_svm(
    X: np.ndarray,
    labels: list[str],
    lam: float = 1e-4,
    epochs: int = 100,
    rng_seed: int = 42,
    mode: str = "ovr",
) -> SvmModel:
    if lam <= 0:
        raise ValueError("regularization lam must be positive")
    if mode not in ("ovr", "binary"):
        raise ValueError("mode must be 'ovr' or 'binary'")
    codes = _labels_to_codes(labels)
    if len(set(codes.tolist())) < 2:
        raise ValueError("training set must contain both classes")
    n, V = X.shape
    Xaug = np.hstack([X.astype(np.float64), np.ones((n, 1))])
    rng = np.random.default_rng(rng_seed)
    orders = np.stack([rng.permutation(n) for _ in range(epochs)]).astype(np.int64)
    scorer_classes = [DISEASE] if mode == "binary" else list(CLASSES)
    weights = np.zeros((len(scorer_classes), V))
    biases = np.zeros(len(scorer_classes))
    for s, cls in enumerate(scorer_classes):
        # Same pre-drawn orders for every scorer: with two classes the
        # one-vs-rest pair is exactly sign-symmetric.
        y = np.where(codes == CLASSES.index(cls), 1.0, -1.0)
        w = np.zeros(V + 1)
        kernels.svm_epochs(Xaug, y, orders, w, lam)
        weights[s] = w[:V]
        biases[s] = w[V]
    return SvmModel(mode, weights, biases, lam, epochs, rng_seed, "")


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------


def stratified_split(
    labels: list[str], doc_ids: list[str], ratio: float, seed: int
) -> tuple[list[int], list[int]]:
    """Deterministic stratified holdout. Train gets floor(ratio * n_c) per class."""
    rng = np.random.default_rng(seed)
    train, test = [], []
    for cls in CLASSES:
        idx = [i for i in range(len(labels)) if labels[i] == cls]
        idx.sort(key=lambda i: doc_ids[i])
        idx = [idx[j] for j in rng.permutation(len(idx))]
        n_train = int(len(idx) * ratio)
        train.extend(idx[:n_train])
        test.extend(idx[n_train:])
    return sorted(train), sorted(test)


def confusion_matrix(true: list[str], pred: list[str]) -> list[list[int]]:
    m = [[0, 0], [0, 0]]
    for t, p in zip(true, pred):
        m[CLASSES.index(t)][CLASSES.index(p)] += 1
    return m


def metrics_from_confusion(matrix: list[list[int]]) -> dict:
    total = sum(sum(row) for row in matrix)
    accuracy = (matrix[0][0] + matrix[1][1]) / total if total else 0.0
    per_class = {}
    f1s, weights = [], []
    for c, cls in enumerate(CLASSES):
        tp = matrix[c][c]
        fp = sum(matrix[r][c] for r in range(2) if r != c)
        fn = sum(matrix[c][r] for r in range(2) if r != c)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[cls] = {"precision": precision, "recall": recall, "f1": f1}
        f1s.append(f1)
        weights.append(sum(matrix[c]))
    f1_weighted = (
        sum(f * w for f, w in zip(f1s, weights)) / sum(weights) if sum(weights) else 0.0
    )
    return {
        "accuracy": accuracy,
        "per_class": per_class,
        "f1_macro": sum(f1s) / len(f1s),
        "f1_weighted": f1_weighted,
        "confusion": matrix,
    }


DEFAULT_HYPERPARAMS = {
    "mnb": {"smoothing": 1.0},
    "knn": {"k": 5},
    "svm": {"lam": 1e-4, "epochs": 100, "rng_seed": 42, "mode": "ovr"},
}


def train_kind(kind: str, X: np.ndarray, labels: list[str], doc_ids: list[str], params: dict):
    p = dict(DEFAULT_HYPERPARAMS[kind], **params)
    if kind == "mnb":
        return train_mnb(X, labels, smoothing=p["smoothing"])
    if kind == "knn":
        return train_knn(X, labels, doc_ids, k=p["k"])
    if kind == "svm":
        return train_svm(
            X, labels, lam=p["lam"], epochs=p["epochs"], rng_seed=p["rng_seed"], mode=p["mode"]
        )
    raise ValueError(f"unknown model kind {kind!r}")


def evaluate(
    kinds: list[str],
    feats: Featurized,
    labels: list[str],
    split_seed: int,
    ratio: float = 0.7,
    params: dict | None = None,
    repeats: int | None = None,
) -> dict:
    """Train each kind on a stratified holdout split and report test metrics.

    ``repeats`` switches to repeated splits (seeds split_seed..split_seed+r-1)
    and adds mean/stddev summaries per model.
    """
    params = params or {}
    for cls in CLASSES:
        if labels.count(cls) < 2:
            raise ValueError(f"class {cls} has fewer than 2 docs; cannot split")
    seeds = [split_seed] if not repeats else [split_seed + r for r in range(repeats)]
    reports = []
    for seed in seeds:
        train_idx, test_idx = stratified_split(labels, feats.doc_ids, ratio, seed)
        Xtr, Xte = feats.X[train_idx], feats.X[test_idx]
        ytr = [labels[i] for i in train_idx]
        yte = [labels[i] for i in test_idx]
        ids_tr = [feats.doc_ids[i] for i in train_idx]
        models = {}
        for kind in kinds:
            model = train_kind(kind, Xtr, ytr, ids_tr, params.get(kind, {}))
            pred = model.predict(Xte)
            models[kind] = metrics_from_confusion(confusion_matrix(yte, pred))
        reports.append(
            {
                "split_seed": seed,
                "train_count": len(train_idx),
                "test_count": len(test_idx),
                "models": models,
            }
        )
    if not repeats:
        return reports[0]
    summary = {}
    for kind in kinds:
        accs = [r["models"][kind]["accuracy"] for r in reports]
        f1s = [r["models"][kind]["f1_macro"] for r in reports]
        summary[kind] = {
            "accuracy_mean": float(np.mean(accs)),
            "accuracy_std": float(np.std(accs)),
            "f1_macro_mean": float(np.mean(f1s)),
            "f1_macro_std": float(np.std(f1s)),
        }
    return {"repeats": len(seeds), "splits": reports, "summary": summary}


# --------------------------------------------------------------------------
# Model files
# --------------------------------------------------------------------------


def save_model(model, space: FeatureSpace, path: Path | str) -> None:
    base = {
        "format": MODEL_FORMAT,
        "format_version": MODEL_FORMAT_VERSION,
        "feature_space_sha256": space.sha256,
        "vocab": list(space.vocab),
    }
    if isinstance(model, MnbModel):
        base.update(
            kind="mnb",
            log_priors=model.log_priors.tolist(),
            log_likelihoods=model.log_likelihoods.tolist(),
            smoothing=model.smoothing,
        )
    elif isinstance(model, KnnModel):
        base.update(
            kind="knn",
            X=model.X.tolist(),
            labels=model.labels,
            doc_ids=model.doc_ids,
            k=model.k,
        )
    elif isinstance(model, SvmModel):
        base.update(
            kind="svm",
            mode=model.mode,
            weights=model.weights.tolist(),
            biases=model.biases.tolist(),
            lam=model.lam,
            epochs=model.epochs,
            rng_seed=model.rng_seed,
        )
    else:
        raise TypeError(f"unknown model type {type(model)!r}")
    atomic_write_text(path, json.dumps(base, ensure_ascii=False))


def load_model(path: Path | str):
    d = load_json(path)
    if d.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a classifier model file")
    space = FeatureSpace(tuple(d["vocab"]))
    if space.sha256 != d["feature_space_sha256"]:
        raise ValueError(f"{path}: feature space hash mismatch; vocab was altered")
    kind = d["kind"]
    if kind == "mnb":
        model = MnbModel(
            np.array(d["log_priors"]),
            np.array(d["log_likelihoods"]),
            d["smoothing"],
            d["feature_space_sha256"],
        )
    elif kind == "knn":
        model = KnnModel(
            np.array(d["X"], dtype=np.float64),
            list(d["labels"]),
            list(d["doc_ids"]),
            d["k"],
            d["feature_space_sha256"],
        )
    elif kind == "svm":
        model = SvmModel(
            d["mode"],
            np.array(d["weights"]),
            np.array(d["biases"]),
            d["lam"],
            d["epochs"],
            d["rng_seed"],
            d["feature_space_sha256"],
        )
    else:
        raise ValueError(f"{path}: unknown model kind {kind!r}")
    return model, space
