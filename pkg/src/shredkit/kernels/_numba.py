"""numba-compiled loop kernels; semantics mirror ``_numpy`` exactly."""

import numpy as np
from numba import njit


@njit(cache=True)
def _midranks(x, order):
    n = x.shape[0]
    ranks = np.empty(n, dtype=np.float64)
    tie_term = 0.0
    i = 0
    while i < n:
        j = i
        while j + 1 < n and x[order[j + 1]] == x[order[i]]:
            j += 1
        # positions i..j (0-based) share rank mean(i+1 .. j+1)
        r = 0.5 * (i + j) + 1.0
        for m in range(i, j + 1):
            ranks[order[m]] = r
        t = float(j - i + 1)
        tie_term += t * t * t - t
        i = j + 1
    return ranks, tie_term


def midranks(values):
    x = np.ascontiguousarray(values, dtype=np.float64)
    # numpy's C sort beats numba's compiled one; only the tie scan is jitted
    ranks, tie_term = _midranks(x, np.argsort(x))
    return ranks, float(tie_term)


@njit(cache=True)
def _inscale_counts(hist, masks):
    out = np.zeros(masks.shape[0], dtype=np.float64)
    for s in range(masks.shape[0]):
        acc = 0.0
        for c in range(masks.shape[1]):
            if masks[s, c] != 0:
                acc += hist[c]
        out[s] = acc
    return out


def inscale_counts(hist, masks):
    return _inscale_counts(
        np.ascontiguousarray(hist, dtype=np.float64),
        np.ascontiguousarray(masks, dtype=np.float64),
    )


@njit(cache=True)
def _backoff_scores(unigram, add_k, rows, indptr, ids, counts, totals, backoff):
    vsize = unigram.shape[0]
    total = 0.0
    for v in range(vsize):
        total += unigram[v]
    denom0 = total + add_k * vsize
    scores = np.empty(vsize, dtype=np.float64)
    for v in range(vsize):
        scores[v] = (unigram[v] + add_k) / denom0
    for r in range(rows.shape[0]):
        row = rows[r]
        for v in range(vsize):
            scores[v] *= backoff
        if row < 0:
            continue
        denom = totals[row] + add_k * vsize
        for j in range(indptr[row], indptr[row + 1]):
            scores[ids[j]] = (counts[j] + add_k) / denom
    norm = 0.0
    for v in range(vsize):
        norm += scores[v]
    for v in range(vsize):
        scores[v] /= norm
    return scores


def backoff_scores(unigram, add_k, rows, indptr, ids, counts, totals, backoff):
    return _backoff_scores(
        unigram,
        float(add_k),
        np.asarray(rows, dtype=np.int64),
        indptr,
        ids,
        counts,
        totals,
        float(backoff),
    )


@njit(cache=True)
def _nb_log_joint(token_ids, log_lik, log_prior):
    out = log_prior.copy()
    for a in range(log_lik.shape[0]):
        acc = 0.0
        for i in range(token_ids.shape[0]):
            acc += log_lik[a, token_ids[i]]
        out[a] += acc
    return out


def nb_log_joint(token_ids, log_lik, log_prior):
    return _nb_log_joint(np.asarray(token_ids, dtype=np.int64), log_lik, log_prior)
