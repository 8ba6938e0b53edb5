"""Vectorized numpy implementations of the hot kernels.

Each function here has a loop-based twin in ``_numba`` with the same
signature and semantics; ``shredkit.kernels`` picks one at import time.
"""

import numpy as np


def midranks(values):
    """Average ranks (1-based) of ``values`` and the tie term sum(t**3 - t)."""
    x = np.asarray(values, dtype=np.float64)
    n = x.shape[0]
    if n == 0:
        return np.empty(0, dtype=np.float64), 0.0
    uniq, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    upper = np.cumsum(counts).astype(np.float64)
    # ranks of a tie block span (upper - t + 1) .. upper
    block_rank = upper - (counts - 1) / 2.0
    t = counts.astype(np.float64)
    return block_rank[inverse], float(np.sum(t * t * t - t))


def inscale_counts(hist, masks):
    """Mass of ``hist`` (length 12) inside each row of the 0/1 ``masks`` matrix."""
    return np.asarray(masks, dtype=np.float64) @ np.asarray(hist, dtype=np.float64)


def backoff_scores(unigram, add_k, rows, indptr, ids, counts, totals, backoff):
    """Normalized add-k backoff distribution over the vocabulary.

    ``rows`` lists count-table rows for increasingly long context suffixes
    (-1 where the suffix was never observed). At each level, tokens seen
    after that suffix take their add-k estimate; all others inherit the
    previous level's score times ``backoff``.
    """
    vsize = unigram.shape[0]
    scores = (unigram + add_k) / (unigram.sum() + add_k * vsize)
    for row in rows:
        scores = scores * backoff
        if row < 0:
            continue
        lo, hi = indptr[row], indptr[row + 1]
        denom = totals[row] + add_k * vsize
        scores[ids[lo:hi]] = (counts[lo:hi] + add_k) / denom
    return scores / scores.sum()


def nb_log_joint(token_ids, log_lik, log_prior):
    """Per-class log prior plus summed token log likelihoods."""
    ids = np.asarray(token_ids, dtype=np.int64)
    return log_prior + log_lik[:, ids].sum(axis=1)
