"""Graph convolution layers expressed on the autodiff tape.

Each layer function takes a :class:`Tape`, the precomputed
:class:`GraphOperators`, the input tensor and its parameters. Inputs may be
plain arrays (treated as constants) so the same code serves tests and
training.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.sparse as sp

from ..graph import (DirectedGraph, NormalizedAdjacency, add_self_loops, normalize,
                     symmetrize)
from .autograd import Tape, Tensor

VARIANTS = ("gcn", "cheb", "sage", "agnn", "gat")


class GraphOperators:
    """Propagation structures derived once from a graph and cached.

    ``symmetric=True`` symmetrizes the graph before anything is derived.
    """

    def __init__(self, graph: DirectedGraph, symmetric: bool = True):
        self.raw = graph
        self.graph = symmetrize(graph) if symmetric else graph
        self.num_nodes = graph.num_nodes

    @cached_property
    def gcn(self) -> NormalizedAdjacency:
        return normalize(self.graph, "symmetric-gcn")

    @cached_property
    def laplacian(self) -> NormalizedAdjacency:
        return normalize(self.graph, "scaled-laplacian")

    @cached_property
    def attention(self):
        """CSR ``(indptr, cols)`` of the graph with a self-loop on every node."""
        g = add_self_loops(self.graph)
        return g.indptr, g.indices

    @cached_property
    def neighbor_lists(self):
        """Out-neighbours without self; ``(indptr, cols)``."""
        g = self.graph
        src = g.sources()
        keep = src != g.indices
        cols = g.indices[keep]
        counts = np.bincount(src[keep], minlength=g.num_nodes)
        indptr = np.zeros(g.num_nodes + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        return indptr, cols

    @cached_property
    def full_mean(self) -> sp.csr_matrix:
        indptr, cols = self.neighbor_lists
        deg = np.diff(indptr)
        w = np.repeat(np.where(deg > 0, 1.0 / np.maximum(deg, 1), 0.0), deg)
        return sp.csr_matrix((w, cols, indptr), shape=(self.num_nodes, self.num_nodes))

    def sampled_mean(self, sample_size: int | None, rng_seed: int | None, epoch: int) -> sp.csr_matrix:
        """Mean operator over ``sample_size`` neighbours drawn without replacement.

        Draws depend only on ``(rng_seed, epoch, node)``.
        """
        if sample_size is None:
            return self.full_mean
        indptr, cols = self.neighbor_lists
        deg = np.diff(indptr)
        if deg.max(initial=0) <= sample_size:
            return self.full_mean
        new_cols, new_ptr = [], [0]
        base = np.random.SeedSequence([0 if rng_seed is None else int(rng_seed), int(epoch)])
        for i in range(self.num_nodes):
            nb = cols[indptr[i]:indptr[i + 1]]
            if nb.size > sample_size:
                rng = np.random.default_rng(np.random.SeedSequence(
                    base.entropy, spawn_key=(int(epoch), i)))
                nb = np.sort(rng.choice(nb, size=sample_size, replace=False))
            new_cols.append(nb)
            new_ptr.append(new_ptr[-1] + nb.size)
        new_ptr = np.asarray(new_ptr, dtype=np.int64)
        new_cols = np.concatenate(new_cols) if new_cols else np.zeros(0, dtype=np.int64)
        d = np.diff(new_ptr)
        w = np.repeat(np.where(d > 0, 1.0 / np.maximum(d, 1), 0.0), d)
        return sp.csr_matrix((w, new_cols, new_ptr), shape=(self.num_nodes, self.num_nodes))


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape if shape is not None else (fan_in, fan_out))


def _bias(tape: Tape, h: Tensor, b):
    return h if b is None else tape.add(h, b)


# -------------------------------------------------------------------------
# layers


def gcn_layer(tape: Tape, ops: GraphOperators | NormalizedAdjacency, h, w, b=None) -> Tensor:
    """``A_hat H W`` with the renormalized adjacency."""
    adj = ops.gcn if isinstance(ops, GraphOperators) else ops
    if adj.kind != "symmetric-gcn":
        raise ValueError(f"gcn layer needs a symmetric-gcn operator, got {adj.kind}")
    return _bias(tape, tape.spmm(adj.matrix, tape.matmul(h, w)), b)


def cheb_layer(tape: Tape, ops: GraphOperators | NormalizedAdjacency, h, weights, b=None) -> Tensor:
    """``sum_k T_k(L_hat) H W_k`` with the Chebyshev recurrence, ``K = len(weights)``."""
    lap = ops.laplacian if isinstance(ops, GraphOperators) else ops
    if lap.kind != "scaled-laplacian":
        raise ValueError(f"cheb layer needs a scaled-laplacian operator, got {lap.kind}")
    if len(weights) < 1:
        raise ValueError("Chebyshev order K must be >= 1")
    m = lap.matrix
    t_prev = tape.const(h)
    out = tape.matmul(t_prev, weights[0])
    if len(weights) > 1:
        t_cur = tape.spmm(m, t_prev)
        out = tape.add(out, tape.matmul(t_cur, weights[1]))
        for k in range(2, len(weights)):
            t_next = tape.sub(tape.scale(tape.spmm(m, t_cur), 2.0), t_prev)
            out = tape.add(out, tape.matmul(t_next, weights[k]))
            t_prev, t_cur = t_cur, t_next
    return _bias(tape, out, b)


def sage_mean_layer(tape: Tape, mean_op: sp.spmatrix, h, w_self, w_neigh, b=None) -> Tensor:
    """``H W_self + mean_{j in S(i)} H_j W_neigh``; ``mean_op`` holds the sampled means."""
    h = tape.const(h)
    neigh = tape.matmul(tape.spmm(mean_op, h), w_neigh)
    return _bias(tape, tape.add(tape.matmul(h, w_self), neigh), b)


def agnn_layer(tape: Tape, ops: GraphOperators, h, beta) -> Tensor:
    """Attention propagation ``P H`` with ``P_ij = softmax_j(beta * cos(H_i, H_j))``.

    ``j`` ranges over the neighbours of ``i`` and ``i`` itself.
    """
    indptr, cols = ops.attention
    h = tape.const(h)
    cos = tape.edge_dot(tape.row_normalize(h), indptr, cols)
    e = tape.mul(cos, beta)
    p = tape.segment_softmax(e, indptr)
    return tape.edge_aggregate(p, h, indptr, cols)


def agnn_attention(ops: GraphOperators, h, beta) -> np.ndarray:
    """Edge attention weights (CSR order over the self-looped graph), no tape."""
    tape = Tape()
    indptr, cols = ops.attention
    e = tape.mul(tape.edge_dot(tape.row_normalize(h), indptr, cols), beta)
    return tape.segment_softmax(e, indptr).data


def gat_head(tape: Tape, ops: GraphOperators, h, w, a_src, a_dst, slope=0.2):
    """One attention head; returns (output, attention weights tensor)."""
    indptr, cols = ops.attention
    rows = np.repeat(np.arange(ops.num_nodes), np.diff(indptr))
    hw = tape.matmul(h, w)
    s = tape.matmul(hw, a_src)     # (n, 1)
    t = tape.matmul(hw, a_dst)
    s = tape.gather(tape_flat(tape, s), rows)
    t = tape.gather(tape_flat(tape, t), cols)
    e = tape.leaky_relu(tape.add(s, t), slope)
    alpha = tape.segment_softmax(e, indptr)
    return tape.edge_aggregate(alpha, hw, indptr, cols), alpha


def tape_flat(tape: Tape, a: Tensor) -> Tensor:
    """``(n, 1)`` -> ``(n,)`` view as a tape op."""
    a = tape.const(a)
    shape = a.data.shape
    return tape._out(a.data.reshape(-1), (a,), lambda g: tape._acc(a, g.reshape(shape)), "flat")


def gat_layer(tape: Tape, ops: GraphOperators, h, heads, slope=0.2, concat=False, b=None) -> Tensor:
    """Multi-head GAT. ``heads`` is a list of ``(W, a_src, a_dst)``.

    Head outputs are concatenated (hidden layers) or averaged (output layer).
    The attention logit ``a . [W h_i || W h_j]`` splits into
    ``a_src . W h_i + a_dst . W h_j``.
    """
    if len(heads) < 1:
        raise ValueError("need at least one head")
    outs = [gat_head(tape, ops, h, w, a1, a2, slope)[0] for (w, a1, a2) in heads]
    out = outs[0] if len(outs) == 1 else (tape.concat(outs) if concat else tape.mean_of(outs))
    return _bias(tape, out, b)
