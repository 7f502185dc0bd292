"""Cross-checks between the numba kernels and their numpy fallbacks."""

import os
import subprocess
import sys

import numpy as np
import pytest

from denguewatch import kernels

needs_numba = pytest.mark.skipif(
    kernels.gibbs_sweep_numba is None, reason="numba not available"
)


def random_gibbs_state(seed=0, D=12, V=30, K=4, n=400):
    rng = np.random.default_rng(seed)
    doc_ids = rng.integers(0, D, n).astype(np.int32)
    word_ids = rng.integers(0, V, n).astype(np.int32)
    assignments = rng.integers(0, K, n).astype(np.int32)
    doc_topic = np.zeros((D, K), dtype=np.int64)
    topic_word = np.zeros((K, V), dtype=np.int64)
    np.add.at(doc_topic, (doc_ids, assignments), 1)
    np.add.at(topic_word, (assignments, word_ids), 1)
    topic_totals = topic_word.sum(axis=1)
    seed_topic = np.full(V, -1, dtype=np.int32)
    seed_topic[0] = 0
    seed_topic[1] = 1
    beta, boost = 0.01, 25.0
    beta_sums = np.full(K, beta * V)
    for k in range(K):
        beta_sums[k] += (boost - 1.0) * beta * int((seed_topic == k).sum())
    uniforms = rng.random(n)
    return (
        doc_ids, word_ids, assignments, doc_topic, topic_word, topic_totals,
        0.5, beta, boost, seed_topic, beta_sums, uniforms,
    )


@needs_numba
def test_gibbs_paths_bit_identical():
    args_a = random_gibbs_state(seed=11)
    args_b = tuple(a.copy() if isinstance(a, np.ndarray) else a for a in args_a)
    for _ in range(5):  # several sweeps over the same uniforms stresses state coupling
        kernels.gibbs_sweep_numpy(*args_a)
        kernels.gibbs_sweep_numba(*args_b)
    for a, b in zip(args_a, args_b):
        if isinstance(a, np.ndarray):
            assert np.array_equal(a, b)


@needs_numba
def test_svm_paths_agree():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(40, 8))
    y = np.where(rng.random(40) < 0.5, 1.0, -1.0)
    orders = np.stack([rng.permutation(40) for _ in range(30)]).astype(np.int64)
    w1 = np.zeros(8)
    w2 = np.zeros(8)
    kernels.svm_epochs_numpy(X, y, orders, w1, 0.01)
    kernels.svm_epochs_numba(X, y, orders, w2, 0.01)
    assert np.allclose(w1, w2, rtol=1e-9, atol=1e-12)
    probe = rng.normal(size=(25, 8))
    assert np.array_equal(np.sign(probe @ w1), np.sign(probe @ w2))


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, DENGUEWATCH_NO_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", "from denguewatch import kernels; print(kernels.backend_name())"],
        capture_output=True,
        text=True,
        env=env,
        check=True,
    )
    assert out.stdout.strip() == "numpy"


def test_default_backend_reports():
    assert kernels.backend_name() in ("numba", "numpy")
