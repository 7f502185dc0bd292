"""Hot numeric kernels: collapsed Gibbs sweeps and hinge-loss SGD epochs.

Each kernel has a numba ``@njit`` build and a pure-numpy fallback. The numpy
path is selected by setting ``DENGUEWATCH_NO_NUMBA=1`` (or when numba is not
importable). Both paths consume pre-drawn uniforms / pre-drawn permutations,
so a fitted model depends only on the caller's RNG seed, and the two Gibbs
paths agree bit-for-bit: probabilities are accumulated left-to-right in both.

``benchmarks/bench_kernels.py`` times the two paths against each other.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on minimal installs
    _HAVE_NUMBA = False

_DISABLED = os.environ.get("DENGUEWATCH_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")
USE_NUMBA = _HAVE_NUMBA and not _DISABLED


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


# --------------------------------------------------------------------------
# Collapsed Gibbs sweep.
#
# Sampling weight for topic k of word w in doc d:
#   (doc_topic[d,k] + alpha) * (topic_word[k,w] + beta'(k,w)) / (topic_totals[k] + beta_sums[k])
# where beta'(k,w) = beta*boost when w is a seed word bound to topic k, else beta.
# seed_topic_of_word[w] is the bound topic index or -1.
# --------------------------------------------------------------------------


def gibbs_sweep_numpy(
    doc_ids: np.ndarray,
    word_ids: np.ndarray,
    assignments: np.ndarray,
    doc_topic: np.ndarray,
    topic_word: np.ndarray,
    topic_totals: np.ndarray,
    alpha: float,
    beta: float,
    boost: float,
    seed_topic_of_word: np.ndarray,
    beta_sums: np.ndarray,
    uniforms: np.ndarray,
) -> None:
    K = topic_word.shape[0]
    beta_w = np.full(K, beta)
    boosted = beta * boost
    for i in range(doc_ids.shape[0]):
        d = doc_ids[i]
        w = word_ids[i]
        z = assignments[i]
        doc_topic[d, z] -= 1
        topic_word[z, w] -= 1
        topic_totals[z] -= 1
        st = seed_topic_of_word[w]
        if st >= 0:
            beta_w[st] = boosted
        p = (doc_topic[d] + alpha) * (topic_word[:, w] + beta_w) / (topic_totals + beta_sums)
        if st >= 0:
            beta_w[st] = beta
        cum = np.cumsum(p)
        target = uniforms[i] * cum[-1]
        z_new = int(np.searchsorted(cum, target, side="right"))
        if z_new >= K:
            z_new = K - 1
        assignments[i] = z_new
        doc_topic[d, z_new] += 1
        topic_word[z_new, w] += 1
        topic_totals[z_new] += 1


if _HAVE_NUMBA:

    @njit(cache=True)
    def gibbs_sweep_numba(  # pragma: no cover - compiled
        doc_ids,
        word_ids,
        assignments,
        doc_topic,
        topic_word,
        topic_totals,
        alpha,
        beta,
        boost,
        seed_topic_of_word,
        beta_sums,
        uniforms,
    ):
        K = topic_word.shape[0]
        p = np.empty(K, dtype=np.float64)
        boosted = beta * boost
        for i in range(doc_ids.shape[0]):
            d = doc_ids[i]
            w = word_ids[i]
            z = assignments[i]
            doc_topic[d, z] -= 1
            topic_word[z, w] -= 1
            topic_totals[z] -= 1
            st = seed_topic_of_word[w]
            acc = 0.0
            for k in range(K):
                bw = boosted if st == k else beta
                acc += (doc_topic[d, k] + alpha) * (topic_word[k, w] + bw) / (
                    topic_totals[k] + beta_sums[k]
                )
                p[k] = acc
            target = uniforms[i] * acc
            z_new = K - 1
            for k in range(K):
                if target < p[k]:
                    z_new = k
                    break
            assignments[i] = z_new
            doc_topic[d, z_new] += 1
            topic_word[z_new, w] += 1
            topic_totals[z_new] += 1

else:  # pragma: no cover
    gibbs_sweep_numba = None


def gibbs_sweep(*args, **kwargs) -> None:
    if USE_NUMBA:
        gibbs_sweep_numba(*args, **kwargs)
    else:
        gibbs_sweep_numpy(*args, **kwargs)


# --------------------------------------------------------------------------
# Hinge-loss SGD, Pegasos schedule eta_t = 1/(lam*t).
# X arrives bias-augmented (a trailing constant-1 column), so the whole
# parameter vector is regularized and the 1/(lam*t) schedule is stable:
#   objective = lam/2 * ||w||^2 + mean_i max(0, 1 - y_i w.x_i).
# `orders` carries one pre-drawn permutation per epoch so the trajectory is
# a pure function of the caller's RNG seed.
# --------------------------------------------------------------------------


def svm_epochs_numpy(
    X: np.ndarray,
    y: np.ndarray,
    orders: np.ndarray,
    w: np.ndarray,
    lam: float,
) -> None:
    t = 0
    for e in range(orders.shape[0]):
        for pos in range(orders.shape[1]):
            i = orders[e, pos]
            t += 1
            eta = 1.0 / (lam * t)
            margin = y[i] * (X[i] @ w)
            w *= 1.0 - eta * lam
            if margin < 1.0:
                w += (eta * y[i]) * X[i]


if _HAVE_NUMBA:

    @njit(cache=True)
    def svm_epochs_numba(X, y, orders, w, lam):  # pragma: no cover - compiled
        t = 0
        for e in range(orders.shape[0]):
            for pos in range(orders.shape[1]):
                i = orders[e, pos]
                t += 1
                eta = 1.0 / (lam * t)
                margin = y[i] * np.dot(X[i], w)
                scale = 1.0 - eta * lam
                if margin < 1.0:
                    for j in range(w.shape[0]):
                        w[j] = scale * w[j] + (eta * y[i]) * X[i, j]
                else:
                    for j in range(w.shape[0]):
                        w[j] = scale * w[j]

else:  # pragma: no cover
    svm_epochs_numba = None


def svm_epochs(X, y, orders, w, lam) -> None:
    if USE_NUMBA:
        svm_epochs_numba(X, y, orders, w, lam)
    else:
        svm_epochs_numpy(X, y, orders, w, lam)
