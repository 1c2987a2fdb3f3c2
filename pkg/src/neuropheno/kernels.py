"""Hot numeric kernels with numba and pure-numpy backends.

Three inner loops dominate runtime: the skip-gram/negative-sampling epoch,
the Pegasos subgradient epoch, and the token n-gram code scan used by the
phrase matcher. Each exists twice:

* ``*_numba``: scalar loops compiled with ``@njit(cache=True, nogil=True)``.
* ``*_numpy``: a vectorized (or plain-Python, where the algorithm is
  inherently sequential) fallback with identical semantics.

The active backend is picked at import time: numba when importable, unless
the environment variable ``NEUROPHENO_DISABLE_NUMBA`` is set to a non-empty
value other than "0". Both backends are deterministic for fixed inputs; the
two may differ in the last few ulps because vectorized reductions round
differently than scalar loops.

``benchmarks/bench_kernels.py`` times both backends side by side.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE_FLAG = os.environ.get("NEUROPHENO_DISABLE_NUMBA", "")
NUMBA_DISABLED = _DISABLE_FLAG not in ("", "0")

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


USE_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED
BACKEND = "numba" if USE_NUMBA else "numpy"

# Odd 64-bit multiplier for rolling n-gram codes (wraparound arithmetic).
NGRAM_MULTIPLIER = 0x100000001B3
_UINT64_MASK = (1 << 64) - 1


# ---------------------------------------------------------------------------
# shared numerics
# ---------------------------------------------------------------------------


def log_sigmoid(x: np.ndarray | float):
    """Numerically stable log(sigmoid(x)); same formula as the kernels."""
    ax = np.abs(x)
    return np.minimum(x, 0.0) - np.log1p(np.exp(-ax))


def sigmoid(x: np.ndarray | float):
    """Numerically stable sigmoid matching the scalar-kernel branch math."""
    ax = np.abs(x)
    ex = np.exp(-ax)
    positive = 1.0 / (1.0 + ex)
    return np.where(np.asarray(x) >= 0.0, positive, ex / (1.0 + ex))


def ngram_code(ids) -> int:
    """Rolling code of a token-id sequence with int64 wraparound semantics."""
    code = 0
    for tid in ids:
        code = (code * NGRAM_MULTIPLIER + int(tid)) & _UINT64_MASK
    if code >= 1 << 63:
        code -= 1 << 64
    return code


# ---------------------------------------------------------------------------
# skip-gram with negative sampling: one epoch over precomputed pairs
# ---------------------------------------------------------------------------
#
# Inputs are fully precomputed by the caller (pair enumeration and negative
# draws come from a seeded numpy Generator), so both backends are pure
# functions of their arguments. ``negatives`` rows may contain -1 entries,
# which are skipped (used for accidental hits and in-row duplicates).
# The learning rate decays linearly from alpha0 to alpha_min over
# ``total_updates`` global updates; ``t_start`` is the global update counter
# at the start of this epoch. Returns the summed pair loss.


@njit(cache=True, nogil=True)
def sgns_epoch_numba(syn0, syn1, centers, contexts, negatives,
                     alpha0, alpha_min, t_start, total_updates):  # pragma: no cover - jitted
    n_pairs = centers.shape[0]
    k = negatives.shape[1]
    dim = syn0.shape[1]
    span = alpha0 - alpha_min
    loss_sum = 0.0
    grad = np.empty(dim, dtype=np.float64)
    for p in range(n_pairs):
        t = t_start + p
        alpha = alpha0 - span * (t / total_updates)
        if alpha < alpha_min:
            alpha = alpha_min
        c = centers[p]
        for d in range(dim):
            grad[d] = 0.0
        # positive target, then surviving negatives
        for slot in range(k + 1):
            if slot == 0:
                target = contexts[p]
                label = 1.0
            else:
                target = negatives[p, slot - 1]
                if target < 0:
                    continue
                label = 0.0
            score = 0.0
            for d in range(dim):
                score += syn0[c, d] * syn1[target, d]
            if label == 1.0:
                z = score
            else:
                z = -score
            az = abs(z)
            loss_sum += -(min(z, 0.0) - np.log1p(np.exp(-az)))
            asc = abs(score)
            es = np.exp(-asc)
            if score >= 0.0:
                f = 1.0 / (1.0 + es)
            else:
                f = es / (1.0 + es)
            g = (label - f) * alpha
            for d in range(dim):
                grad[d] += g * syn1[target, d]
            for d in range(dim):
                syn1[target, d] += g * syn0[c, d]
        for d in range(dim):
            syn0[c, d] += grad[d]
    return loss_sum


def sgns_epoch_numpy(syn0, syn1, centers, contexts, negatives,
                     alpha0, alpha_min, t_start, total_updates):
    n_pairs = centers.shape[0]
    span = alpha0 - alpha_min
    loss_sum = 0.0
    for p in range(n_pairs):
        alpha = alpha0 - span * ((t_start + p) / total_updates)
        if alpha < alpha_min:
            alpha = alpha_min
        c = centers[p]
        negs = negatives[p]
        targets = np.concatenate(([contexts[p]], negs[negs >= 0])).astype(np.int64)
        labels = np.zeros(len(targets))
        labels[0] = 1.0
        v = syn0[c]
        rows = syn1[targets]  # gather copies the pre-update rows
        scores = rows @ v
        z = np.where(labels == 1.0, scores, -scores)
        loss_sum += float(-(np.minimum(z, 0.0) - np.log1p(np.exp(-np.abs(z)))).sum())
        g = (labels - sigmoid(scores)) * alpha
        syn1[targets] += np.outer(g, v)
        syn0[c] = v + g @ rows
    return loss_sum


# ---------------------------------------------------------------------------
# Pegasos epoch over a binary CSR design matrix
# ---------------------------------------------------------------------------
#
# Weight state uses the usual scale trick: the true weight vector is
# ``s * v``. The caller handles the intercept by augmenting every row with a
# constant feature, so the whole parameter vector shares the L2 penalty.
# ``order`` is a seeded permutation of sample rows; ``t_start`` is the
# global step counter before this epoch. Feature values are implicitly 1.0
# (binary indicators).
#
# The epoch-averaged iterate (Polyak average over the steps of this epoch)
# is maintained sparsely: ``avg_correction`` must come in zeroed and on
# return satisfies  sum_t w_t = c * v - avg_correction,  with ``c`` the
# returned accumulator. Iterates are accumulated before each update, so the
# average covers the weights actually used for the epoch's margins.


@njit(cache=True, nogil=True)
def pegasos_epoch_numba(v, avg_correction, indices, indptr, y, order, lam, s, t_start):  # pragma: no cover - jitted
    c = 0.0
    for step in range(order.shape[0]):
        i = order[step]
        t = t_start + step + 1
        eta = 1.0 / (lam * t)
        acc = 0.0
        for j in range(indptr[i], indptr[i + 1]):
            acc += v[indices[j]]
        margin = y[i] * (s * acc)
        c += s
        if t > 1:
            s *= 1.0 - 1.0 / t
        if margin < 1.0:
            coef = eta * y[i] / s
            for j in range(indptr[i], indptr[i + 1]):
                v[indices[j]] += coef
                avg_correction[indices[j]] += coef * c
    return s, c


def pegasos_epoch_numpy(v, avg_correction, indices, indptr, y, order, lam, s, t_start):
    c = 0.0
    for step in range(order.shape[0]):
        i = int(order[step])
        t = t_start + step + 1
        eta = 1.0 / (lam * t)
        row = indices[indptr[i]:indptr[i + 1]]
        margin = y[i] * (s * v[row].sum())
        c += s
        if t > 1:
            s *= 1.0 - 1.0 / t
        if margin < 1.0:
            coef = eta * y[i] / s
            v[row] += coef
            avg_correction[row] += coef * c
    return s, c


# ---------------------------------------------------------------------------
# token n-gram code scan (phrase matcher)
# ---------------------------------------------------------------------------
#
# ``ids`` holds int64 token ids (-1 for tokens outside the pattern alphabet).
# Returns the start positions whose length-L rolling code occurs in
# ``sorted_codes``; the caller verifies candidates against the actual token
# ids, so hash collisions only cost time, never correctness.


@njit(cache=True, nogil=True)
def scan_codes_numba(ids, length, sorted_codes):  # pragma: no cover - jitted
    n = ids.shape[0]
    m = n - length + 1
    out = np.empty(max(m, 0), dtype=np.int64)
    if m <= 0 or sorted_codes.shape[0] == 0:
        return out[:0]
    count = 0
    n_codes = sorted_codes.shape[0]
    for i in range(m):
        code = ids[i]
        for t in range(1, length):
            code = code * NGRAM_MULTIPLIER + ids[i + t]
        lo = 0
        hi = n_codes
        while lo < hi:
            mid = (lo + hi) // 2
            if sorted_codes[mid] < code:
                lo = mid + 1
            else:
                hi = mid
        if lo < n_codes and sorted_codes[lo] == code:
            out[count] = i
            count += 1
    return out[:count]


def scan_codes_numpy(ids, length, sorted_codes):
    n = ids.shape[0]
    m = n - length + 1
    if m <= 0 or sorted_codes.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    codes = ids[:m].copy()
    for t in range(1, length):
        codes *= NGRAM_MULTIPLIER
        codes += ids[t:t + m]
    pos = np.searchsorted(sorted_codes, codes)
    pos_clipped = np.minimum(pos, sorted_codes.shape[0] - 1)
    hits = sorted_codes[pos_clipped] == codes
    return np.nonzero(hits)[0].astype(np.int64)


# ---------------------------------------------------------------------------
# backend dispatch
# ---------------------------------------------------------------------------

if USE_NUMBA:
    sgns_epoch = sgns_epoch_numba
    pegasos_epoch = pegasos_epoch_numba
    scan_codes = scan_codes_numba
else:
    sgns_epoch = sgns_epoch_numpy
    pegasos_epoch = pegasos_epoch_numpy
    scan_codes = scan_codes_numpy

_warmed_up = False


def warmup() -> None:
    """Trigger JIT compilation of the active kernels on tiny inputs.

    A no-op on the numpy backend. Call before timing-sensitive work so
    compilation cost is not attributed to the first real corpus.
    """
    global _warmed_up
    if _warmed_up or not USE_NUMBA:
        _warmed_up = True
        return
    syn0 = np.zeros((2, 2))
    syn1 = np.zeros((2, 2))
    sgns_epoch(syn0, syn1,
               np.zeros(1, dtype=np.int32), np.ones(1, dtype=np.int32),
               np.full((1, 1), -1, dtype=np.int32), 0.01, 0.001, 0, 1)
    pegasos_epoch(np.zeros(2), np.zeros(2), np.zeros(1, dtype=np.int64),
                  np.array([0, 1], dtype=np.int64), np.ones(1),
                  np.zeros(1, dtype=np.int64), 0.1, 1.0, 0)
    scan_codes(np.zeros(3, dtype=np.int64), 2, np.zeros(1, dtype=np.int64))
    _warmed_up = True
