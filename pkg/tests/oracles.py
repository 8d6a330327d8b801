"""Independent dense / brute-force reference implementations.

Nothing here imports the package's numerical code; every function works on
plain dense numpy arrays or Python containers.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


# -- graphs ---------------------------------------------------------------


def dense_adjacency(n, edges):
    """Dense matrix from ``(src, dst[, w])`` tuples, duplicates summed."""
    a = np.zeros((n, n))
    for e in edges:
        a[e[0], e[1]] += e[2] if len(e) > 2 else 1.0
    return a


def dense_symmetrize(a):
    return np.maximum(a, a.T)


def dense_gcn(a):
    at = a + np.eye(a.shape[0])
    d = at.sum(axis=1)
    dm = np.diag(1.0 / np.sqrt(d))
    return dm @ at @ dm


def dense_row_stochastic(a):
    a = a.copy()
    for i in range(a.shape[0]):
        if a[i].sum() <= 0:
            a[i, i] = 1.0
    return a / a.sum(axis=1, keepdims=True)


def dense_laplacian(a):
    d = a.sum(axis=1)
    inv = np.array([1.0 / math.sqrt(x) if x > 0 else 0.0 for x in d])
    return np.diag(inv) @ (np.diag(d) - a) @ np.diag(inv)


def dense_scaled_laplacian(a, lam=None):
    lap = dense_laplacian(a)
    if lam is None:
        lam = float(np.linalg.eigvalsh(lap).max()) if a.shape[0] else 0.0
        if lam <= 1e-12:
            lam = 2.0
    return 2.0 * lap / lam - np.eye(a.shape[0])


def neighbourhood_1_5(n, edges, seeds, min_posts=0, counts=None):
    seeds = set(seeds)
    keep = set(seeds)
    for e in edges:
        if e[0] in seeds:
            keep.add(e[1])
        if e[1] in seeds:
            keep.add(e[0])
    if min_posts:
        keep = {v for v in keep if v in seeds or counts[v] >= min_posts}
    return sorted(keep)


# -- layers ---------------------------------------------------------------


def relu(x):
    return np.maximum(x, 0.0)


def log_softmax_rows(z):
    out = np.empty_like(z)
    for i, row in enumerate(z):
        m = max(row)
        out[i] = row - m - math.log(sum(math.exp(v - m) for v in row))
    return out


def neighbours_with_self(a_sym):
    n = a_sym.shape[0]
    return [sorted(set(np.flatnonzero(a_sym[i]).tolist()) | {i}) for i in range(n)]


def dense_gcn_layer(a_sym, h, w, b=0.0):
    return dense_gcn(a_sym) @ h @ w + b


def dense_cheb_layer(a_sym, h, ws, b=0.0, lam=None):
    lt = dense_scaled_laplacian(a_sym, lam)
    n = a_sym.shape[0]
    ts = [np.eye(n), lt]
    while len(ts) < len(ws):
        ts.append(2.0 * lt @ ts[-1] - ts[-2])
    return sum(ts[k] @ h @ ws[k] for k in range(len(ws))) + b


def dense_sage_layer(a_sym, h, w_self, w_neigh, b=0.0):
    n = a_sym.shape[0]
    agg = np.zeros_like(h)
    for i in range(n):
        nb = [j for j in np.flatnonzero(a_sym[i]) if j != i]
        if nb:
            agg[i] = h[nb].mean(axis=0)
    return h @ w_self + agg @ w_neigh + b


def dense_agnn_layer(a_sym, h, beta):
    out = np.zeros_like(h)
    norms = [np.linalg.norm(r) for r in h]
    unit = [r / nr if nr > 0 else np.zeros_like(r) for r, nr in zip(h, norms)]
    for i, nb in enumerate(neighbours_with_self(a_sym)):
        scores = np.array([beta * float(unit[i] @ unit[j]) for j in nb])
        p = np.exp(scores - scores.max())
        p /= p.sum()
        out[i] = sum(pj * h[j] for pj, j in zip(p, nb))
    return out


def dense_agnn_attention(a_sym, h, beta):
    n = a_sym.shape[0]
    att = np.zeros((n, n))
    norms = np.linalg.norm(h, axis=1)
    unit = np.where(norms[:, None] > 0, h / np.where(norms > 0, norms, 1.0)[:, None], 0.0)
    for i, nb in enumerate(neighbours_with_self(a_sym)):
        s = np.array([beta * unit[i] @ unit[j] for j in nb])
        p = np.exp(s - s.max())
        att[i, nb] = p / p.sum()
    return att


def dense_gat_head(a_sym, h, w, a_src, a_dst, slope=0.2):
    hw = h @ w
    n = a_sym.shape[0]
    out = np.zeros((n, hw.shape[1]))
    att = np.zeros((n, n))
    for i, nb in enumerate(neighbours_with_self(a_sym)):
        e = []
        for j in nb:
            z = float(np.concatenate([hw[i], hw[j]]) @ np.concatenate([a_src.ravel(), a_dst.ravel()]))
            e.append(z if z > 0 else slope * z)
        e = np.array(e)
        p = np.exp(e - e.max())
        p /= p.sum()
        att[i, nb] = p
        out[i] = sum(pj * hw[j] for pj, j in zip(p, nb))
    return out, att


def dense_gat_layer(a_sym, h, heads, slope=0.2, concat=False, b=0.0):
    outs = [dense_gat_head(a_sym, h, w, s, d, slope)[0] for (w, s, d) in heads]
    out = np.concatenate(outs, axis=1) if concat else sum(outs) / len(outs)
    return out + b


# -- diffusion and clustering --------------------------------------------


def dense_diffusion(a_repost, seeds, iterations):
    w = dense_row_stochastic(a_repost.T)
    b = np.zeros(a_repost.shape[0])
    b[list(seeds)] = 1.0
    history = [b]
    for _ in range(iterations):
        b = w @ b
        history.append(b)
    return b, history


def kmeans_1d_bruteforce(values, k):
    """Exhaustive search over contiguous partitions of the sorted values."""
    x = np.sort(np.asarray(values, dtype=float))
    n = x.size
    best = (math.inf, None)
    for cuts in itertools.combinations(range(1, n), k - 1):
        bounds = (0,) + cuts + (n,)
        cost = 0.0
        for lo, hi in zip(bounds, bounds[1:]):
            seg = x[lo:hi]
            mu = sum(seg) / len(seg)
            cost += sum((v - mu) ** 2 for v in seg)
        if cost < best[0] - 1e-15:
            best = (cost, bounds)
    cost, bounds = best
    centroids = [float(np.mean(x[lo:hi])) for lo, hi in zip(bounds, bounds[1:])]
    return cost, centroids


# -- metrics --------------------------------------------------------------


def naive_metrics(y_true, y_pred):
    tp = fp = fn = tn = 0
    for t, p in zip(y_true, y_pred):
        if t == 1 and p == 1:
            tp += 1
        elif t == 0 and p == 1:
            fp += 1
        elif t == 1 and p == 0:
            fn += 1
        else:
            tn += 1

    def prf(tp_, fp_, fn_):
        p = tp_ / (tp_ + fp_) if tp_ + fp_ else 0.0
        r = tp_ / (tp_ + fn_) if tp_ + fn_ else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        return p, r, f

    c0 = prf(tn, fn, fp)
    c1 = prf(tp, fp, fn)
    return {"precision": (c0[0], c1[0]), "recall": (c0[1], c1[1]), "f1": (c0[2], c1[2]),
            "macro_f1": (c0[2] + c1[2]) / 2, "accuracy": (tp + tn) / len(y_true)}


# -- temporal analytics ---------------------------------------------------


def snapshot_filter(posts, edges, ends, start):
    """Per month: present users, sorted edge pairs and post timestamps per user.

    ``posts`` maps user -> list of timestamps, ``edges`` is ``(src, dst, ts)``.
    Items before ``start`` belong to the first month.
    """
    out = []
    for end in ends:
        kept_posts = {u: sorted(t for t in ts if t <= end) for u, ts in posts.items()}
        kept_edges = sorted({(s, d) for s, d, t in edges if t <= end})
        present = {u for u, ts in kept_posts.items() if ts}
        for s, d in kept_edges:
            present.update((s, d))
        out.append((sorted(present), kept_edges,
                    {u: kept_posts.get(u, []) for u in sorted(present)}))
    return out


def joint_buckets_bruteforce(targets, tracked):
    counts = {}
    for r in range(1, len(tracked) + 1):
        for combo in itertools.combinations(tracked, r):
            counts["-".join(combo)] = sum(
                1 for t in targets.values() if set(t) & set(tracked) == set(combo))
    counts["none"] = sum(1 for t in targets.values() if not set(t) & set(tracked))
    return counts


def sticky_oracle(raw_rows):
    out = []
    for row in raw_rows:
        seen = False
        eff = []
        for v in row:
            seen = seen or v == 1
            eff.append(1 if seen else v)
        out.append(eff)
    return out
