"""DeepWalk and node2vec: random walks plus skip-gram with negative sampling."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import sgns
from ._rng import child_seed, substream
from .containers import read_embedding, write_embedding
from .graph import DirectedGraph


@dataclass(frozen=True)
class WalkConfig:
    walks_per_node: int = 10
    walk_length: int = 80
    window: int = 10
    p: float = 1.0
    q: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if min(self.walks_per_node, self.walk_length, self.window) < 1:
            raise ValueError("walk counts and window must be >= 1")
        if self.p <= 0 or self.q <= 0:
            raise ValueError("p and q must be positive")


# -------------------------------------------------------------------------
# alias sampling


def alias_setup(probs):
    """Walker alias tables ``(prob, alias)`` for a categorical distribution."""
    p = np.asarray(probs, dtype=np.float64)
    k = p.size
    p = p / p.sum() * k
    prob = np.zeros(k)
    alias = np.zeros(k, dtype=np.int64)
    small = [i for i in range(k) if p[i] < 1.0]
    large = [i for i in range(k) if p[i] >= 1.0]
    while small and large:
        s, l = small.pop(), large.pop()
        prob[s] = p[s]
        alias[s] = l
        p[l] = p[l] + p[s] - 1.0
        (small if p[l] < 1.0 else large).append(l)
    for i in large + small:
        prob[i] = 1.0
        alias[i] = i
    return prob, alias


def _csr_alias(g: DirectedGraph):
    """Alias tables for every row, laid out along the CSR edge array."""
    prob = np.ones(g.num_edges)
    alias = np.zeros(g.num_edges, dtype=np.int64)
    for u in range(g.num_nodes):
        lo, hi = g.indptr[u], g.indptr[u + 1]
        if hi - lo > 1:
            w = g.weights[lo:hi]
            if w.sum() <= 0:
                w = np.ones(hi - lo)
            pr, al = alias_setup(w)
            prob[lo:hi] = pr
            alias[lo:hi] = al
    return prob, alias


@njit(cache=True)
def _splitmix(x):
    x = (x + np.uint64(0x9E3779B97F4A7C15))
    z = x
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x, z ^ (z >> np.uint64(31))


@njit(cache=True)
def _uniform(state):
    state, z = _splitmix(state)
    return state, (z >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _alias_draw(prob, alias, lo, k, state):
    state, u = _uniform(state)
    j = min(np.int64(u * k), k - 1)
    state, v = _uniform(state)
    if v < prob[lo + j]:
        return state, j
    return state, alias[lo + j]


@njit(cache=True)
def alias_sample_many(prob, alias, n, seed):
    out = np.empty(n, dtype=np.int64)
    state = np.uint64(seed)
    k = prob.size
    for i in range(n):
        state, out[i] = _alias_draw(prob, alias, 0, k, state)
    return out


@njit(cache=True)
def _has_edge(indptr, indices, u, v):
    lo, hi = indptr[u], indptr[u + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        if indices[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo < indptr[u + 1] and indices[lo] == v


@njit(cache=True)
def _walks(indptr, indices, prob, alias, starts, walks_per_node, length, seed,
           biased, inv_p, inv_q):
    n_walks = starts.size * walks_per_node
    out = np.full((n_walks, length), -1, dtype=np.int64)
    lens = np.zeros(n_walks, dtype=np.int64)
    max_bias = max(inv_p, 1.0, inv_q)
    for si in range(starts.size):
        s = starts[si]
        for w in range(walks_per_node):
            row = si * walks_per_node + w
            # independent stream per (seed, node, walk index)
            state = np.uint64(seed) ^ (np.uint64(s) * np.uint64(0x100000001B3)) ^ (
                np.uint64(w + 1) * np.uint64(0xC2B2AE3D27D4EB4F))
            state, _ = _splitmix(state)
            out[row, 0] = s
            n = 1
            prev = -1
            cur = s
            while n < length:
                lo = indptr[cur]
                k = indptr[cur + 1] - lo
                if k == 0:
                    break
                if not biased or prev < 0:
                    state, j = _alias_draw(prob, alias, lo, k, state)
                    nxt = indices[lo + j]
                else:
                    while True:
                        state, j = _alias_draw(prob, alias, lo, k, state)
                        cand = indices[lo + j]
                        if cand == prev:
                            bias = inv_p
                        elif _has_edge(indptr, indices, prev, cand):
                            bias = 1.0
                        else:
                            bias = inv_q
                        state, r = _uniform(state)
                        if r * max_bias < bias:
                            nxt = cand
                            break
                out[row, n] = nxt
                n += 1
                prev = cur
                cur = nxt
            lens[row] = n
    return out, lens


def generate_walks(g: DirectedGraph, cfg: WalkConfig, biased: bool | None = None) -> list[np.ndarray]:
    """``walks_per_node`` walks from every node, ordered by (node, walk index).

    Steps follow out-edges proportionally to weight. With ``biased`` (node2vec)
    the step after ``t -> v`` is reweighted by ``1/p`` for returning to ``t``,
    1 for nodes adjacent to ``t`` and ``1/q`` otherwise (exact, via rejection).
    Walks stop early at nodes without out-edges.
    """
    if g.num_nodes == 0:
        raise ValueError("graph is empty")
    if biased is None:
        biased = not (cfg.p == 1.0 and cfg.q == 1.0)
    prob, alias = _csr_alias(g)
    out, lens = _walks(
        g.indptr, g.indices, prob, alias, np.arange(g.num_nodes), cfg.walks_per_node,
        cfg.walk_length, child_seed(cfg.seed, "walks"), biased, 1.0 / cfg.p, 1.0 / cfg.q,
    )
    return [out[i, :lens[i]].copy() for i in range(out.shape[0])]


def write_walks(walks, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for w in walks:
            fh.write(" ".join(map(str, w.tolist())) + "\n")


def read_walks(path) -> list[np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        return [np.array(line.split(), dtype=np.int64) for line in fh if line.strip()]


# -------------------------------------------------------------------------
# skip-gram


@dataclass
class NodeEmbedding:
    matrix: np.ndarray
    config: dict
    loss_history: np.ndarray
    n_pairs: int


def train_skipgram(walks, num_nodes: int | None = None, dim: int = 128, window: int = 10,
                   negative: int = 5, epochs: int = 5, alpha: float = 0.025,
                   min_alpha: float = 0.0001, seed: int = 0) -> NodeEmbedding:
    """Skip-gram with negative sampling over walk sequences."""
    walks = [np.asarray(w, dtype=np.int64) for w in walks]
    if not walks:
        raise ValueError("no walks")
    tokens = np.concatenate(walks)
    n = int(num_nodes if num_nodes is not None else tokens.max() + 1)
    offsets = np.zeros(len(walks) + 1, dtype=np.int64)
    np.cumsum([w.size for w in walks], out=offsets[1:])
    counts = np.bincount(tokens, minlength=n)
    cum_table = sgns.make_cum_table(counts)
    rng = substream(seed, "skipgram.init")
    syn0 = (rng.random((n, dim)) - 0.5) / dim
    syn1 = np.zeros((n, dim))
    losses, pairs = sgns.train_skipgram_walks(
        syn0, syn1, tokens, offsets, int(window), cum_table, int(negative), int(epochs),
        float(alpha), float(min_alpha), child_seed(seed, "skipgram.train"),
    )
    config = dict(dim=dim, window=window, negative=negative, epochs=epochs, alpha=alpha,
                  min_alpha=min_alpha, seed=seed)
    return NodeEmbedding(syn0, config, losses / max(pairs / max(epochs, 1), 1), int(pairs))


class _WalkEmbedding(TransformerMixin, BaseEstimator, auto_wrap_output_keys=None):
    _biased = False

    def _walk_config(self) -> WalkConfig:
        return WalkConfig(self.walks_per_node, self.walk_length, self.window,
                          getattr(self, "p", 1.0), getattr(self, "q", 1.0), self.random_state)

    def fit(self, graph: DirectedGraph, y=None):
        cfg = self._walk_config()
        walks = generate_walks(graph, cfg, biased=self._biased)
        emb = train_skipgram(walks, graph.num_nodes, self.dimensions, self.window,
                             self.negative, self.epochs, seed=self.random_state)
        self.walk_config_ = cfg
        self.embedding_ = emb.matrix
        self.loss_history_ = emb.loss_history
        self.n_pairs_ = emb.n_pairs
        self.num_nodes_ = graph.num_nodes
        return self

    def transform(self, graph: DirectedGraph | None = None):
        """Embedding rows for the fitted graph (node embeddings are transductive)."""
        check_is_fitted(self, "embedding_")
        if graph is not None and graph.num_nodes != self.num_nodes_:
            raise ValueError("node embeddings only exist for the fitted graph")
        return self.embedding_.copy()

    def save(self, path, node_ids=None) -> None:
        check_is_fitted(self, "embedding_")
        ids = [str(i) for i in (node_ids if node_ids is not None else range(self.num_nodes_))]
        meta = {"kind": type(self).__name__.lower(), "params": self.get_params(),
                "walk_config": asdict(self.walk_config_)}
        write_embedding(path, ids, None, {"nodes": self.embedding_}, meta)

    @staticmethod
    def load_matrix(path):
        ids, _, mats, meta = read_embedding(path)
        return ids, mats["nodes"], meta


class DeepWalk(_WalkEmbedding):
    """Uniform (weight-proportional) first-order walks + skip-gram."""

    def __init__(self, dimensions=128, walks_per_node=10, walk_length=80, window=10,
                 negative=5, epochs=5, random_state=0):
        self.dimensions = dimensions
        self.walks_per_node = walks_per_node
        self.walk_length = walk_length
        self.window = window
        self.negative = negative
        self.epochs = epochs
        self.random_state = random_state


class Node2Vec(_WalkEmbedding):
    """Second-order p/q-biased walks + skip-gram."""

    _biased = True

    def __init__(self, dimensions=128, walks_per_node=10, walk_length=80, window=10,
                 p=1.0, q=1.0, negative=5, epochs=5, random_state=0):
        self.dimensions = dimensions
        self.walks_per_node = walks_per_node
        self.walk_length = walk_length
        self.window = window
        self.p = p
        self.q = q
        self.negative = negative
        self.epochs = epochs
        self.random_state = random_state
