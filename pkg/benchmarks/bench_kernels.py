#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Runs each hot kernel on a representative workload with both backends and
prints timing, speedup, and the maximum numeric deviation between the two
results. The numba backend is compiled once (warmup) before timing.

Usage: python benchmarks/bench_kernels.py [--quick]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from neuropheno import kernels


def time_call(fn, *args, repeats=3):
    best = float("inf")
    result = None
    for _ in range(repeats):
        started = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - started)
    return best, result


def bench_sgns(quick: bool):
    rng = np.random.default_rng(0)
    n_pairs = 50_000 if quick else 400_000
    vocab, dim, k = 2000, 100, 5
    centers = rng.integers(0, vocab, n_pairs).astype(np.int32)
    contexts = rng.integers(0, vocab, n_pairs).astype(np.int32)
    negatives = rng.integers(0, vocab, (n_pairs, k)).astype(np.int32)
    negatives[negatives == contexts[:, None]] = -1
    for j in range(1, k):
        dup = (negatives[:, j:j + 1] == negatives[:, :j]).any(axis=1)
        negatives[dup & (negatives[:, j] >= 0), j] = -1
    syn0 = (rng.random((vocab, dim)) - 0.5) / dim
    syn1 = np.zeros((vocab, dim))

    def run(fn):
        a, b = syn0.copy(), syn1.copy()
        loss = fn(a, b, centers, contexts, negatives, 0.025, 1e-4, 0, n_pairs)
        return a, b, loss

    t_nb, (a_nb, _, loss_nb) = time_call(lambda: run(kernels.sgns_epoch_numba), repeats=2)
    t_np, (a_np, _, loss_np) = time_call(lambda: run(kernels.sgns_epoch_numpy), repeats=1)
    deviation = float(np.abs(a_nb - a_np).max())
    report("sgns epoch", f"{n_pairs} pairs, dim {dim}, k {k}", t_nb, t_np, deviation)


def bench_pegasos(quick: bool):
    rng = np.random.default_rng(1)
    n = 1000 if quick else 5000
    dim = 1 << 18
    nnz = 200
    rows = [np.sort(rng.choice(dim, nnz, replace=False)) for _ in range(n)]
    indptr = np.zeros(n + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(r) for r in rows])
    indices = np.concatenate(rows).astype(np.int64)
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    order = rng.permutation(n).astype(np.int64)

    def run(fn):
        v = np.zeros(dim)
        u = np.zeros(dim)
        s, c = fn(v, u, indices, indptr, y, order, 1e-4, 1.0, 0)
        return (c * v - u) / n

    t_nb, w_nb = time_call(lambda: run(kernels.pegasos_epoch_numba), repeats=2)
    t_np, w_np = time_call(lambda: run(kernels.pegasos_epoch_numpy), repeats=1)
    deviation = float(np.abs(w_nb - w_np).max())
    report("pegasos epoch", f"{n} samples, nnz {nnz}", t_nb, t_np, deviation)


def bench_scan(quick: bool):
    rng = np.random.default_rng(2)
    n_notes = 500 if quick else 2000
    tokens = 500
    universe = 1000
    ids_list = [rng.integers(-1, universe, tokens).astype(np.int64)
                for _ in range(n_notes)]
    grams = [tuple(rng.integers(0, universe, length).tolist())
             for length in (1, 2, 3) for _ in range(150)]
    tables = {
        length: np.array(sorted({kernels.ngram_code(g) for g in grams
                                 if len(g) == length}), dtype=np.int64)
        for length in (1, 2, 3)
    }

    def run(fn):
        hits = 0
        for ids in ids_list:
            for length, codes in tables.items():
                hits += len(fn(ids, length, codes))
        return hits

    t_nb, hits_nb = time_call(lambda: run(kernels.scan_codes_numba))
    t_np, hits_np = time_call(lambda: run(kernels.scan_codes_numpy))
    deviation = 0.0 if hits_nb == hits_np else float("nan")
    report("ngram scan", f"{n_notes} notes x {tokens} tokens, 450 patterns",
           t_nb, t_np, deviation)


def report(name: str, workload: str, t_numba: float, t_numpy: float,
           deviation: float):
    speedup = t_numpy / t_numba if t_numba > 0 else float("inf")
    print(f"{name:<14} {workload:<38} numba {t_numba * 1e3:9.1f} ms   "
          f"numpy {t_numpy * 1e3:9.1f} ms   speedup {speedup:6.1f}x   "
          f"max|dev| {deviation:.2e}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true",
                        help="smaller workloads for a fast sanity pass")
    args = parser.parse_args()
    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"active backend: {kernels.BACKEND}; compiling kernels...")
    kernels.warmup()
    bench_sgns(args.quick)
    bench_pegasos(args.quick)
    bench_scan(args.quick)


if __name__ == "__main__":
    main()
