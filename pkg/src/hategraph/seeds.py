"""Belief diffusion over a repost network and tiered sampling of users to label."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from ._rng import substream
from .graph import DirectedGraph, NormalizedAdjacency, normalize, reverse
from .posthoc import Lexicon, post_tokens
from .text.corpus import UserCorpus

logger = logging.getLogger(__name__)

TIER_NAMES = ("low", "medium", "high")


@dataclass(frozen=True)
class BeliefVector:
    values: np.ndarray
    iteration: int


@dataclass(frozen=True)
class TierAssignment:
    tier: np.ndarray          # int per node, 0 = lowest centroid
    centroids: np.ndarray     # ascending
    cost: float               # within-cluster sum of squares

    def names(self) -> list[str]:
        if len(self.centroids) == 3:
            return [TIER_NAMES[t] for t in self.tier]
        return [str(t) for t in self.tier]


@dataclass(frozen=True)
class TierSample:
    nodes: np.ndarray
    by_tier: dict
    shortfall: dict


def lexicon_seeds(corpus: UserCorpus, lexicon: Lexicon, users, min_posts: int = 10) -> np.ndarray:
    """Indices into ``users`` of everyone with at least ``min_posts`` lexicon-matching posts."""
    if min_posts < 1:
        raise ValueError("min_posts must be >= 1")
    hits = np.zeros(len(users), dtype=np.int64)
    for i, u in enumerate(users):
        hits[i] = sum(1 for p in corpus.posts.get(u, ()) if lexicon.matches(post_tokens(p)))
    return np.flatnonzero(hits >= min_posts)


def build_belief_network(repost_graph: DirectedGraph) -> NormalizedAdjacency:
    """Reverse the repost edges and row-normalize.

    If ``a`` reposts ``b`` the belief operator row of ``b`` draws from ``a``.
    Rows left empty get a unit self-loop.
    """
    if repost_graph.num_edges and repost_graph.weights.min() < 0:
        raise ValueError("repost weights must be non-negative")
    return normalize(reverse(repost_graph), "row-stochastic")


def diffuse(op: NormalizedAdjacency, seeds, iterations: int = 5) -> BeliefVector:
    """Synchronous averaging ``b <- W b`` starting from the seed indicator.

    Seeds are not clamped and there is no damping.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    n = op.num_nodes
    b = np.zeros(n)
    seeds = np.asarray(list(seeds), dtype=np.int64)
    b[seeds] = 1.0
    m = op.matrix
    for _ in range(iterations):
        b = m @ b
    # guard against round-off drifting just outside [0, 1]
    np.clip(b, 0.0, 1.0, out=b)
    return BeliefVector(b, iterations)


def _segment_cost(s0, s1, s2, i, j):
    """SSE of sorted unique values ``i..j-1`` from prefix sums (vectorised in i)."""
    w = s0[j] - s0[i]
    m1 = s1[j] - s1[i]
    with np.errstate(invalid="ignore", divide="ignore"):
        c = (s2[j] - s2[i]) - np.where(w > 0, m1 * m1 / w, 0.0)
    return np.maximum(c, 0.0)


def _optimal_splits(values: np.ndarray, weights: np.ndarray, k: int):
    """Exact 1-D k-means on weighted sorted values.

    Dynamic programme over prefix lengths with divide-and-conquer row
    minimisation (the split point is monotone in the prefix length).
    Returns split boundaries ``b_0=0 < b_1 < ... < b_k = m``.
    """
    m = values.size
    s0 = np.concatenate([[0.0], np.cumsum(weights)])
    s1 = np.concatenate([[0.0], np.cumsum(weights * values)])
    s2 = np.concatenate([[0.0], np.cumsum(weights * values * values)])

    prev = np.full(m + 1, np.inf)
    prev[1:] = _segment_cost(s0, s1, s2, np.zeros(m, dtype=np.int64), np.arange(1, m + 1))
    prev[0] = np.inf
    back = np.zeros((k, m + 1), dtype=np.int64)

    for c in range(1, k):
        cur = np.full(m + 1, np.inf)
        arg = back[c]

        def solve(lo, hi, opt_lo, opt_hi):
            # fill cur[j] for j in [lo, hi] with split i in [opt_lo, opt_hi]
            if lo > hi:
                return
            j = (lo + hi) // 2
            cand = np.arange(max(opt_lo, c), min(opt_hi, j - 1) + 1)
            if cand.size:
                vals = prev[cand] + _segment_cost(s0, s1, s2, cand, np.full(cand.size, j))
                t = int(np.argmin(vals))
                cur[j], arg[j] = vals[t], cand[t]
                best = int(cand[t])
            else:
                best = opt_lo
            solve(lo, j - 1, opt_lo, best)
            solve(j + 1, hi, best, opt_hi)

        solve(c + 1, m, c, m - 1)
        prev = cur

    bounds = [m]
    j = m
    for c in range(k - 1, 0, -1):
        j = int(back[c][j])
        bounds.append(j)
    bounds.append(0)
    return bounds[::-1], float(prev[m])


def kmeans_1d(scores, k: int = 3) -> TierAssignment:
    """Globally optimal 1-D k-means; clusters ordered by centroid.

    Points equidistant from two centroids go to the lower one.
    """
    x = np.asarray(scores, dtype=np.float64).ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError("scores must be finite")
    uniq, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    if uniq.size < k:
        raise ValueError(f"need at least {k} distinct values, got {uniq.size}")
    w = counts.astype(np.float64)
    bounds, cost = _optimal_splits(uniq, w, k)
    centroids = np.array([
        np.average(uniq[bounds[c]:bounds[c + 1]], weights=w[bounds[c]:bounds[c + 1]])
        for c in range(k)
    ])
    dist = np.abs(x[:, None] - centroids[None, :])
    tier = np.argmin(dist, axis=1)  # argmin keeps the first (lower) index on ties
    return TierAssignment(tier.astype(np.int64), centroids, cost)


def within_cluster_cost(x, tier, k) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(sum(((x[tier == c] - x[tier == c].mean()) ** 2).sum()
                     for c in range(k) if np.any(tier == c)))


def sample_tiers(
    tiers: TierAssignment,
    per_tier: int = 300,
    min_posts: int = 10,
    post_counts=None,
    rng_seed: int | None = 0,
) -> TierSample:
    """Uniformly sample up to ``per_tier`` eligible users from every tier."""
    n = tiers.tier.size
    counts = np.full(n, np.iinfo(np.int64).max) if post_counts is None else np.asarray(post_counts)
    eligible = counts >= min_posts
    rng = substream(rng_seed, "sample_tiers")
    chosen, by_tier, shortfall = [], {}, {}
    for t in range(len(tiers.centroids)):
        pool = np.flatnonzero((tiers.tier == t) & eligible)
        take = min(per_tier, pool.size)
        pick = np.sort(rng.choice(pool, size=take, replace=False)) if take else pool[:0]
        name = TIER_NAMES[t] if len(tiers.centroids) == 3 else str(t)
        by_tier[name] = pick
        shortfall[name] = per_tier - take
        if shortfall[name]:
            logger.info("tier %s short by %d users", name, shortfall[name])
        chosen.append(pick)
    nodes = np.sort(np.concatenate(chosen)) if chosen else np.zeros(0, dtype=np.int64)
    return TierSample(nodes, by_tier, shortfall)


def write_belief_csv(path, beliefs: BeliefVector, tiers: TierAssignment, node_ids=None) -> None:
    names = tiers.names()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "score", "tier"])
        for i, (s, t) in enumerate(zip(beliefs.values, names)):
            w.writerow([i if node_ids is None else node_ids[i], repr(float(s)), t])
