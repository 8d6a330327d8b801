"""Directed sparse graphs, their normalizations and the 1.5-degree extraction.

Graphs are stored as CSR arrays over dense ids ``0..n-1``. An optional
``node_ids`` table maps dense ids back to external (string or int) ids.
Everything here is immutable after construction.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

KINDS = ("symmetric-gcn", "row-stochastic", "scaled-laplacian")


@dataclass(frozen=True, eq=False)
class DirectedGraph:
    """CSR directed graph. Row ``u`` lists the targets of edges ``u -> v``."""

    num_nodes: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    node_ids: tuple | None = None
    weighted: bool = False

    def __post_init__(self):
        for name in ("indptr", "indices", "weights"):
            getattr(self, name).setflags(write=False)

    @property
    def num_edges(self) -> int:
        return int(self.indices.size)

    def out_degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def in_degree(self) -> np.ndarray:
        return np.bincount(self.indices, minlength=self.num_nodes)

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def edge_weights(self, u: int) -> np.ndarray:
        return self.weights[self.indptr[u]:self.indptr[u + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors(u)
        k = np.searchsorted(row, v)
        return bool(k < row.size and row[k] == v)

    def sources(self) -> np.ndarray:
        """Source id of every stored edge, aligned with ``indices``."""
        return np.repeat(np.arange(self.num_nodes), self.out_degree())

    def edges(self) -> list[tuple[int, int, float]]:
        src = self.sources()
        return list(zip(src.tolist(), self.indices.tolist(), self.weights.tolist()))

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.weights.copy(), self.indices.copy(), self.indptr.copy()),
            shape=(self.num_nodes, self.num_nodes),
        )

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def external_id(self, u: int):
        return u if self.node_ids is None else self.node_ids[u]

    def index_of(self) -> dict:
        """External id -> dense id."""
        ids = self.node_ids if self.node_ids is not None else range(self.num_nodes)
        return {x: i for i, x in enumerate(ids)}

    def same_structure(self, other: "DirectedGraph") -> bool:
        return (
            self.num_nodes == other.num_nodes
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.weights, other.weights)
        )

    def __eq__(self, other):
        if not isinstance(other, DirectedGraph):
            return NotImplemented
        return self.same_structure(other) and self.node_ids == other.node_ids

    __hash__ = None


def _sort_ids(ids: Iterable[Hashable]) -> list:
    ids = set(ids)
    try:
        return sorted(ids)
    except TypeError:
        return sorted(ids, key=str)


def _from_coo(n, src, dst, w, reduce, node_ids=None, weighted=False) -> DirectedGraph:
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    w = np.asarray(w, dtype=np.float64)
    if src.size:
        if src.min() < 0 or dst.min() < 0 or src.max() >= n or dst.max() >= n:
            raise ValueError("edge endpoint outside [0, num_nodes)")
        key = src * n + dst
        order = np.argsort(key, kind="stable")
        key, w = key[order], w[order]
        uniq, start = np.unique(key, return_index=True)
        w = reduce.reduceat(w, start) if w.size else w
        src, dst = uniq // n, uniq % n
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return DirectedGraph(
        num_nodes=int(n),
        indptr=indptr,
        indices=dst.astype(np.int64),
        weights=w.astype(np.float64),
        node_ids=None if node_ids is None else tuple(node_ids),
        weighted=weighted,
    )


def build_graph(
    edges: Iterable[Sequence],
    nodes: Sequence[Hashable] | None = None,
    num_nodes: int | None = None,
) -> DirectedGraph:
    """Build a graph from ``(src, dst[, weight])`` tuples.

    Duplicate pairs are merged by summing weights; self-loops are kept.
    Dense ids follow ``nodes`` when given, ``range(num_nodes)`` when only a
    count is given, and otherwise the sorted set of ids seen in ``edges``.
    """
    edges = list(edges)
    weighted = any(len(e) > 2 for e in edges)
    if num_nodes is not None and nodes is None:
        nodes = list(range(num_nodes))
        identity = True
    else:
        identity = False
    if nodes is None:
        nodes = _sort_ids([e[0] for e in edges] + [e[1] for e in edges])
    nodes = list(nodes)
    index = {x: i for i, x in enumerate(nodes)}
    if len(index) != len(nodes):
        raise ValueError("duplicate node ids")
    try:
        src = [index[e[0]] for e in edges]
        dst = [index[e[1]] for e in edges]
    except KeyError as exc:
        raise ValueError(f"edge references undeclared node {exc.args[0]!r}") from None
    w = np.array([float(e[2]) if len(e) > 2 else 1.0 for e in edges], dtype=np.float64)
    if w.size and not np.all(np.isfinite(w)):
        raise ValueError("edge weights must be finite")
    if w.size and w.min() < 0:
        raise ValueError("edge weights must be non-negative")
    return _from_coo(
        len(nodes), src, dst, w, np.add,
        node_ids=None if identity else nodes, weighted=weighted,
    )


def from_arrays(num_nodes, src, dst, weights=None, node_ids=None) -> DirectedGraph:
    """Vectorised constructor over dense ids; duplicates summed."""
    src = np.asarray(src, dtype=np.int64)
    w = np.ones(src.size) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.size and (not np.all(np.isfinite(w)) or w.min() < 0):
        raise ValueError("edge weights must be finite and non-negative")
    return _from_coo(num_nodes, src, dst, w, np.add, node_ids, weighted=weights is not None)


def reverse(g: DirectedGraph) -> DirectedGraph:
    return _from_coo(
        g.num_nodes, g.indices, g.sources(), g.weights, np.add, g.node_ids, g.weighted
    )


def symmetrize(g: DirectedGraph) -> DirectedGraph:
    """Union of both directions; a pair present both ways keeps the larger weight."""
    src, dst = g.sources(), g.indices
    return _from_coo(
        g.num_nodes,
        np.concatenate([src, dst]),
        np.concatenate([dst, src]),
        np.concatenate([g.weights, g.weights]),
        np.maximum,
        g.node_ids,
        g.weighted,
    )


def add_self_loops(g: DirectedGraph) -> DirectedGraph:
    """Give every node without a self-loop one of weight 1."""
    n = g.num_nodes
    has = np.zeros(n, dtype=bool)
    src = g.sources()
    has[src[src == g.indices]] = True
    missing = np.flatnonzero(~has)
    return _from_coo(
        n,
        np.concatenate([src, missing]),
        np.concatenate([g.indices, missing]),
        np.concatenate([g.weights, np.ones(missing.size)]),
        np.add,
        g.node_ids,
        g.weighted,
    )


def induced_subgraph(g: DirectedGraph, nodes) -> tuple[DirectedGraph, np.ndarray]:
    """Subgraph on ``nodes`` (kept in ascending order) and the old-id mapping."""
    keep = np.unique(np.asarray(nodes, dtype=np.int64))
    new_id = np.full(g.num_nodes, -1, dtype=np.int64)
    new_id[keep] = np.arange(keep.size)
    src, dst = new_id[g.sources()], new_id[g.indices]
    ok = (src >= 0) & (dst >= 0)
    ids = None if g.node_ids is None else [g.node_ids[i] for i in keep]
    sub = _from_coo(keep.size, src[ok], dst[ok], g.weights[ok], np.add, ids, g.weighted)
    return sub, keep


# --------------------------------------------------------------------------
# normalized operators


@dataclass(frozen=True, eq=False)
class NormalizedAdjacency:
    matrix: sp.csr_matrix
    kind: str
    lambda_max: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def num_nodes(self) -> int:
        return self.matrix.shape[0]

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()


def _csr(g: DirectedGraph, extra_diag: np.ndarray | None = None) -> sp.csr_matrix:
    m = g.to_scipy()
    if extra_diag is not None:
        m = (m + sp.diags(extra_diag, format="csr")).tocsr()
    m.sum_duplicates()
    m.sort_indices()
    return m


def power_iteration_lambda_max(
    m: sp.csr_matrix, tol: float = 1e-6, max_iter: int = 10_000, seed: int = 0
) -> float:
    """Largest eigenvalue of a symmetric PSD sparse matrix.

    Stops when the Rayleigh quotient changes by less than ``tol`` relative
    over 10 consecutive iterations.
    """
    n = m.shape[0]
    if n == 0 or m.nnz == 0:
        return 0.0
    v = np.random.default_rng(seed).random(n) + 0.5
    v /= np.linalg.norm(v)
    lam = 0.0
    stable = 0
    for _ in range(max_iter):
        w = m @ v
        new = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        if abs(new - lam) <= tol * 1e-3 * max(abs(new), 1e-300):
            stable += 1
            if stable >= 10:
                return new
        else:
            stable = 0
        lam = new
    return lam


def normalized_laplacian(g: DirectedGraph) -> sp.csr_matrix:
    """``D^-1/2 (D - A) D^-1/2`` on a symmetric graph; isolated rows are zero."""
    a = _csr(g)
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv = np.zeros_like(deg)
    nz = deg > 0
    inv[nz] = deg[nz] ** -0.5
    d = sp.diags(inv)
    lap = d @ (sp.diags(deg) - a) @ d
    lap = sp.csr_matrix(lap)
    lap.sum_duplicates()
    lap.sort_indices()
    return lap


def normalize(g: DirectedGraph, kind: str) -> NormalizedAdjacency:
    """Normalized operator for propagation.

    ``symmetric-gcn``: ``D~^-1/2 (A + I) D~^-1/2`` (pass a symmetrized graph).
    ``row-stochastic``: empty rows get a unit self-loop, then rows sum to 1.
    ``scaled-laplacian``: ``2 L / lambda_max - I`` with ``L`` the normalized
    Laplacian; ``lambda_max`` falls back to 2 on edgeless graphs.
    """
    n = g.num_nodes
    if kind == "symmetric-gcn":
        a = _csr(g, np.ones(n))
        deg = np.asarray(a.sum(axis=1)).ravel()
        d = sp.diags(deg ** -0.5)
        m = sp.csr_matrix(d @ a @ d)
        m.sort_indices()
        return NormalizedAdjacency(m, kind)
    if kind == "row-stochastic":
        a = _csr(g)
        rowsum = np.asarray(a.sum(axis=1)).ravel()
        empty = rowsum <= 0
        if empty.any():
            a = _csr(g, empty.astype(np.float64))
            rowsum = np.asarray(a.sum(axis=1)).ravel()
        m = sp.csr_matrix(sp.diags(1.0 / rowsum) @ a)
        m.sort_indices()
        return NormalizedAdjacency(m, kind)
    if kind == "scaled-laplacian":
        lap = normalized_laplacian(g)
        lam = power_iteration_lambda_max(lap)
        if lam <= 1e-12:
            lam = 2.0
        m = sp.csr_matrix(lap * (2.0 / lam) - sp.identity(n, format="csr"))
        m.sort_indices()
        return NormalizedAdjacency(m, kind, lambda_max=lam)
    raise ValueError(f"unknown normalization kind {kind!r}; expected one of {KINDS}")


def spmm(adj: NormalizedAdjacency | sp.spmatrix, dense: np.ndarray) -> np.ndarray:
    m = adj.matrix if isinstance(adj, NormalizedAdjacency) else adj
    dense = np.asarray(dense, dtype=np.float64)
    if dense.shape[0] != m.shape[1]:
        raise ValueError(f"shape mismatch: operator {m.shape}, dense {dense.shape}")
    return np.asarray(m @ dense)


# --------------------------------------------------------------------------
# 1.5-degree network


def extract_1_5_degree(
    g: DirectedGraph, seeds, min_posts: int = 0, post_counts=None
) -> tuple[DirectedGraph, np.ndarray]:
    """Seeds, their in- and out-neighbours, and every edge among them.

    Non-seed nodes with fewer than ``min_posts`` posts are dropped.
    Returns the subgraph and the original dense id of each kept node.
    """
    seeds = np.unique(np.asarray(list(seeds), dtype=np.int64))
    if seeds.size and (seeds[0] < 0 or seeds[-1] >= g.num_nodes):
        raise ValueError("seed outside graph")
    keep = np.zeros(g.num_nodes, dtype=bool)
    keep[seeds] = True
    is_seed = keep.copy()
    src = g.sources()
    keep[g.indices[is_seed[src]]] = True
    keep[src[is_seed[g.indices]]] = True
    if min_posts > 0:
        if post_counts is None:
            raise ValueError("post_counts required when min_posts > 0")
        counts = np.asarray(post_counts)
        keep &= is_seed | (counts >= min_posts)
    if not keep.any():
        raise ValueError("1.5-degree network is empty")
    return induced_subgraph(g, np.flatnonzero(keep))


# --------------------------------------------------------------------------
# file formats


def read_edge_tsv(path, nodes=None) -> DirectedGraph:
    """``src<TAB>dst[<TAB>weight]`` lines; ``#`` lines are comments."""
    edges = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise ValueError(f"{path}:{lineno}: expected 2 or 3 tab-separated fields")
            if len(parts) == 3:
                edges.append((parts[0], parts[1], float(parts[2])))
            else:
                edges.append((parts[0], parts[1]))
    return build_graph(edges, nodes=nodes)


def write_edge_tsv(g: DirectedGraph, path, weights: bool | None = None) -> None:
    weights = g.weighted if weights is None else weights
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for u, v, w in g.edges():
            a, b = g.external_id(u), g.external_id(v)
            fh.write(f"{a}\t{b}\t{w!r}\n" if weights else f"{a}\t{b}\n")


def write_node_mapping(g: DirectedGraph, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i in range(g.num_nodes):
            fh.write(f"{i}\t{g.external_id(i)}\n")


def read_node_mapping(path) -> list[str]:
    ids = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            dense, ext = line.rstrip("\n").split("\t")
            if int(dense) != i:
                raise ValueError(f"{path}: mapping not dense at line {i + 1}")
            ids.append(ext)
    return ids
