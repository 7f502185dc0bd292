#!/usr/bin/env python3
"""Time the numba kernels against their pure-numpy fallbacks.

Builds a synthetic Gibbs-sampling state and an SGD problem, runs each path
on identical inputs, and prints per-path timings plus the speedup. The first
numba call includes JIT compilation; it is timed separately.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from denguewatch import kernels


def gibbs_state(n_tokens: int, D: int, V: int, K: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    doc_ids = rng.integers(0, D, n_tokens).astype(np.int32)
    word_ids = rng.integers(0, V, n_tokens).astype(np.int32)
    assignments = rng.integers(0, K, n_tokens).astype(np.int32)
    doc_topic = np.zeros((D, K), dtype=np.int64)
    topic_word = np.zeros((K, V), dtype=np.int64)
    np.add.at(doc_topic, (doc_ids, assignments), 1)
    np.add.at(topic_word, (assignments, word_ids), 1)
    topic_totals = topic_word.sum(axis=1)
    seed_topic = np.full(V, -1, dtype=np.int32)
    seed_topic[: min(K, 6)] = np.arange(min(K, 6), dtype=np.int32)
    beta, boost = 0.01, 50.0
    beta_sums = np.full(K, beta * V)
    for k in range(K):
        beta_sums[k] += (boost - 1.0) * beta * int((seed_topic == k).sum())
    return dict(
        doc_ids=doc_ids,
        word_ids=word_ids,
        assignments=assignments,
        doc_topic=doc_topic,
        topic_word=topic_word,
        topic_totals=topic_totals,
        alpha=50.0 / K,
        beta=beta,
        boost=boost,
        seed_topic=seed_topic,
        beta_sums=beta_sums,
        rng=rng,
    )


def run_gibbs(fn, state, sweeps: int) -> float:
    s = {k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in state.items() if k != "rng"}
    rng = np.random.default_rng(123)
    t0 = time.perf_counter()
    for _ in range(sweeps):
        uniforms = rng.random(s["doc_ids"].shape[0])
        fn(
            s["doc_ids"], s["word_ids"], s["assignments"], s["doc_topic"],
            s["topic_word"], s["topic_totals"], s["alpha"], s["beta"], s["boost"],
            s["seed_topic"], s["beta_sums"], uniforms,
        )
    return time.perf_counter() - t0


def run_svm(fn, n: int, V: int, epochs: int, seed: int = 1) -> float:
    rng = np.random.default_rng(seed)
    X = np.hstack([rng.integers(0, 5, (n, V)).astype(np.float64), np.ones((n, 1))])
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    orders = np.stack([rng.permutation(n) for _ in range(epochs)]).astype(np.int64)
    w = np.zeros(V + 1)
    t0 = time.perf_counter()
    fn(X, y, orders, w, 1e-4)
    return time.perf_counter() - t0


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tokens", type=int, default=200_000)
    ap.add_argument("--sweeps", type=int, default=20)
    ap.add_argument("--topics", type=int, default=12)
    ap.add_argument("--vocab", type=int, default=5_000)
    ap.add_argument("--docs", type=int, default=2_000)
    ap.add_argument("--svm-n", type=int, default=1_500)
    ap.add_argument("--svm-features", type=int, default=95)
    ap.add_argument("--svm-epochs", type=int, default=100)
    args = ap.parse_args()

    print(f"default backend: {kernels.backend_name()}")
    rows = []

    state = gibbs_state(args.tokens, args.docs, args.vocab, args.topics)
    numpy_t = run_gibbs(kernels.gibbs_sweep_numpy, state, args.sweeps)
    rows.append(("gibbs sweep", "numpy", numpy_t))
    if kernels.gibbs_sweep_numba is not None:
        compile_t = run_gibbs(kernels.gibbs_sweep_numba, state, 1)
        numba_t = run_gibbs(kernels.gibbs_sweep_numba, state, args.sweeps)
        rows.append(("gibbs sweep", "numba (jit compile)", compile_t))
        rows.append(("gibbs sweep", "numba", numba_t))

    numpy_svm = run_svm(kernels.svm_epochs_numpy, args.svm_n, args.svm_features, args.svm_epochs)
    rows.append(("svm epochs", "numpy", numpy_svm))
    if kernels.svm_epochs_numba is not None:
        _ = run_svm(kernels.svm_epochs_numba, args.svm_n, args.svm_features, 1)
        numba_svm = run_svm(kernels.svm_epochs_numba, args.svm_n, args.svm_features, args.svm_epochs)
        rows.append(("svm epochs", "numba", numba_svm))

    width = max(len(r[0]) + len(r[1]) for r in rows) + 4
    print(f"\n{'kernel / path':<{width}} seconds")
    for name, path, t in rows:
        print(f"{name + ' / ' + path:<{width}} {t:8.3f}")
    if kernels.gibbs_sweep_numba is not None:
        print(f"\ngibbs speedup (numpy/numba): {numpy_t / numba_t:.1f}x")
        print(f"svm speedup   (numpy/numba): {numpy_svm / numba_svm:.1f}x")


if __name__ == "__main__":
    main()
