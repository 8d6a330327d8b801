"""Skip-gram with negative sampling: reference gradients and compiled SGD loops.

The compiled loops follow the classic word2vec recipe: a 48-bit linear
congruential generator for all sampling, a cumulative unigram^0.75 table for
negatives and a learning rate decaying linearly over the processed tokens.
Everything is single threaded so runs are bit-for-bit repeatable.
"""
from __future__ import annotations

import numpy as np
from numba import njit


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sgns_loss_and_grad(v, targets, labels):
    """Loss of one SGNS step and its gradients.

    ``v`` is the input vector (document or centre node), ``targets`` the
    output vectors of the positive word followed by the negatives and
    ``labels`` 1 for the positive, 0 for negatives.
    Returns ``(loss, dv, dtargets)``.
    """
    v = np.asarray(v, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    z = targets @ v
    sign = 2.0 * labels - 1.0
    loss = float(np.sum(np.logaddexp(0.0, -sign * z)))
    coef = sigmoid(z) - labels          # d loss / d z
    dv = coef @ targets
    dtargets = coef[:, None] * v[None, :]
    return loss, dv, dtargets


def make_cum_table(counts, exponent: float = 0.75, domain: int = 2**31 - 1) -> np.ndarray:
    """Cumulative table for drawing negatives proportional to ``count**exponent``."""
    p = np.asarray(counts, dtype=np.float64) ** exponent
    if p.sum() <= 0:
        p = np.ones_like(p)
    cum = np.cumsum(p) / p.sum()
    return np.round(cum * domain).astype(np.int64)


@njit(cache=True)
def _lcg(state):
    return (state * np.uint64(25214903917) + np.uint64(11)) & np.uint64(281474976710655)


@njit(cache=True)
def _draw(cum_table, state):
    r = np.int64((state >> np.uint64(16)) % np.uint64(cum_table[-1]))
    lo, hi = 0, cum_table.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cum_table[mid] > r:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True)
def _clip_sigmoid(z):
    if z > 30.0:
        return 1.0
    if z < -30.0:
        return 0.0
    return 1.0 / (1.0 + np.exp(-z))


@njit(cache=True)
def _step(vin, out, word, cum_table, negative, alpha, state, work, update_out=True):
    """One SGD step on (input vector, positive word) with ``negative`` samples.

    Updates ``out`` in place (unless frozen), accumulates the input gradient into ``work``
    (caller applies it) and returns (loss, new rng state).
    """
    dim = vin.size
    for d in range(dim):
        work[d] = 0.0
    loss = 0.0
    for s in range(negative + 1):
        if s == 0:
            target = word
            label = 1.0
        else:
            state = _lcg(state)
            target = _draw(cum_table, state)
            if target == word:
                continue
            label = 0.0
        z = 0.0
        for d in range(dim):
            z += vin[d] * out[target, d]
        f = _clip_sigmoid(z)
        if label == 1.0:
            loss -= np.log(max(f, 1e-300))
        else:
            loss -= np.log(max(1.0 - f, 1e-300))
        g = (label - f) * alpha
        for d in range(dim):
            work[d] += g * out[target, d]
            if update_out:
                out[target, d] += g * vin[d]
    return loss, state


@njit(cache=True)
def train_dbow(doc_vecs, out, tokens, offsets, cum_table, negative, epochs,
               alpha, min_alpha, seed, doc_ids):
    """PV-DBOW epochs; ``doc_ids`` selects which rows of ``doc_vecs`` to train.

    Returns per-epoch summed loss and the number of processed pairs.
    """
    dim = doc_vecs.shape[1]
    work = np.zeros(dim)
    state = np.uint64(seed) & np.uint64(281474976710655)
    total = (offsets[-1]) * epochs
    done = 0
    losses = np.zeros(epochs)
    for ep in range(epochs):
        for k in range(doc_ids.size):
            doc = doc_ids[k]
            for t in range(offsets[k], offsets[k + 1]):
                a = alpha - (alpha - min_alpha) * done / max(total, 1)
                vin = doc_vecs[doc]
                l, state = _step(vin, out, tokens[t], cum_table, negative, a, state, work)
                for d in range(dim):
                    vin[d] += work[d]
                losses[ep] += l
                done += 1
    return losses, done


@njit(cache=True)
def infer_dbow(vec, out, tokens, cum_table, negative, epochs, alpha, min_alpha, seed):
    """Fit one fresh document vector against frozen output vectors (``out`` untouched)."""
    dim = vec.size
    work = np.zeros(dim)
    state = np.uint64(seed) & np.uint64(281474976710655)
    total = tokens.size * epochs
    done = 0
    for ep in range(epochs):
        for t in range(tokens.size):
            a = alpha - (alpha - min_alpha) * done / max(total, 1)
            l, state = _step(vec, out, tokens[t], cum_table, negative, a, state, work, False)
            for d in range(dim):
                vec[d] += work[d]
            done += 1
    return vec


@njit(cache=True)
def train_skipgram_walks(syn0, syn1, tokens, offsets, window, cum_table, negative,
                         epochs, alpha, min_alpha, seed):
    """Skip-gram over node sequences with a randomly shrunk window per centre."""
    dim = syn0.shape[1]
    work = np.zeros(dim)
    state = np.uint64(seed) & np.uint64(281474976710655)
    n_seq = offsets.size - 1
    total = offsets[-1] * epochs
    done = 0
    losses = np.zeros(epochs)
    pairs = 0
    for ep in range(epochs):
        for s in range(n_seq):
            lo, hi = offsets[s], offsets[s + 1]
            for i in range(lo, hi):
                a = alpha - (alpha - min_alpha) * done / max(total, 1)
                state = _lcg(state)
                b = np.int64(state % np.uint64(window))
                start = max(lo, i - window + b)
                stop = min(hi, i + window + 1 - b)
                for j in range(start, stop):
                    if j == i:
                        continue
                    vin = syn0[tokens[j]]
                    l, state = _step(vin, syn1, tokens[i], cum_table, negative, a, state, work)
                    for d in range(dim):
                        vin[d] += work[d]
                    losses[ep] += l
                    pairs += 1
                done += 1
    return losses, pairs


@njit(cache=True)
def single_step(vin, out, word, cum_table, negative, alpha, seed):
    """Apply exactly one compiled SGD step (exposed for gradient checks)."""
    work = np.zeros(vin.size)
    state = np.uint64(seed) & np.uint64(281474976710655)
    negs = np.empty(negative, dtype=np.int64)
    s2 = state
    for s in range(negative):
        s2 = _lcg(s2)
        negs[s] = _draw(cum_table, s2)
    loss, state = _step(vin, out, word, cum_table, negative, alpha, state, work)
    for d in range(vin.size):
        vin[d] += work[d]
    return loss, negs
