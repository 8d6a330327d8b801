"""A small reverse-mode autodiff tape over dense numpy arrays.

Every operation is a method of :class:`Tape`; the tape records nodes in
creation order, which is already a topological order, so ``backward`` walks
the record in reverse and visits each node exactly once. Sparse matrices
only ever appear as constants (graph operators).
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "op", "name")

    def __init__(self, data, requires_grad=False, op="leaf", name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._backward = None
        self.op = op
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.data.shape})"


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


class Tape:
    def __init__(self):
        self.nodes: list[Tensor] = []

    # -- bookkeeping --------------------------------------------------------

    @staticmethod
    def const(x) -> Tensor:
        return x if isinstance(x, Tensor) else Tensor(x)

    def _out(self, data, parents, backward, op) -> Tensor:
        out = Tensor(data, requires_grad=any(p.requires_grad for p in parents), op=op)
        if out.requires_grad:
            out._backward = backward
            self.nodes.append(out)
        return out

    @staticmethod
    def _acc(t: Tensor, g):
        if not t.requires_grad:
            return
        if t.grad is None:
            t.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            t.grad = t.grad + g

    def backward(self, loss: Tensor) -> None:
        if loss.data.size != 1:
            raise ValueError("backward needs a scalar")
        loss.grad = np.ones_like(loss.data)
        for node in reversed(self.nodes):
            if node.grad is not None and node._backward is not None:
                node._backward(node.grad)

    # -- dense algebra ------------------------------------------------------

    def matmul(self, a, b) -> Tensor:
        a, b = self.const(a), self.const(b)

        def back(g):
            self._acc(a, g @ b.data.T)
            self._acc(b, a.data.T @ g)
        return self._out(a.data @ b.data, (a, b), back, "matmul")

    def spmm(self, m: sp.spmatrix, a) -> Tensor:
        """Constant sparse operator times dense tensor."""
        a = self.const(a)
        if m.shape[1] != a.data.shape[0]:
            raise ValueError(f"shape mismatch {m.shape} x {a.data.shape}")
        mt = None

        def back(g):
            nonlocal mt
            if mt is None:
                mt = m.T.tocsr()
            self._acc(a, np.asarray(mt @ g))
        return self._out(np.asarray(m @ a.data), (a,), back, "spmm")

    def add(self, a, b) -> Tensor:
        a, b = self.const(a), self.const(b)

        def back(g):
            self._acc(a, _unbroadcast(g, a.data.shape))
            self._acc(b, _unbroadcast(g, b.data.shape))
        return self._out(a.data + b.data, (a, b), back, "add")

    def sub(self, a, b) -> Tensor:
        a, b = self.const(a), self.const(b)

        def back(g):
            self._acc(a, _unbroadcast(g, a.data.shape))
            self._acc(b, -_unbroadcast(g, b.data.shape))
        return self._out(a.data - b.data, (a, b), back, "sub")

    def scale(self, a, c: float) -> Tensor:
        a = self.const(a)
        return self._out(a.data * c, (a,), lambda g: self._acc(a, g * c), "scale")

    def mul(self, a, b) -> Tensor:
        """Elementwise product with broadcasting (scalars, masks, row vectors)."""
        a, b = self.const(a), self.const(b)

        def back(g):
            self._acc(a, _unbroadcast(g * b.data, a.data.shape))
            self._acc(b, _unbroadcast(g * a.data, b.data.shape))
        return self._out(a.data * b.data, (a, b), back, "mul")

    def mean_of(self, tensors) -> Tensor:
        ts = [self.const(t) for t in tensors]
        k = len(ts)

        def back(g):
            for t in ts:
                self._acc(t, g / k)
        return self._out(sum(t.data for t in ts) / k, tuple(ts), back, "mean_of")

    def concat(self, tensors, axis=1) -> Tensor:
        ts = [self.const(t) for t in tensors]
        sizes = np.cumsum([t.data.shape[axis] for t in ts])[:-1]

        def back(g):
            for t, part in zip(ts, np.split(g, sizes, axis=axis)):
                self._acc(t, part)
        return self._out(np.concatenate([t.data for t in ts], axis=axis), tuple(ts), back,
                         "concat")

    def sum(self, a) -> Tensor:
        a = self.const(a)
        return self._out(np.array(a.data.sum()), (a,),
                         lambda g: self._acc(a, np.broadcast_to(g, a.data.shape)), "sum")

    # -- nonlinearities -----------------------------------------------------

    def relu(self, a) -> Tensor:
        a = self.const(a)
        mask = a.data > 0
        return self._out(a.data * mask, (a,), lambda g: self._acc(a, g * mask), "relu")

    def leaky_relu(self, a, slope=0.2) -> Tensor:
        a = self.const(a)
        d = np.where(a.data > 0, 1.0, slope)
        return self._out(a.data * d, (a,), lambda g: self._acc(a, g * d), "leaky_relu")

    def dropout(self, a, rate: float, rng: np.random.Generator | None, training: bool) -> Tensor:
        """Inverted dropout: kept entries are scaled by ``1/(1-rate)``."""
        a = self.const(a)
        if not training or rate == 0.0:
            return a
        mask = (rng.random(a.data.shape) >= rate) / (1.0 - rate)
        return self._out(a.data * mask, (a,), lambda g: self._acc(a, g * mask), "dropout")

    def log_softmax(self, a) -> Tensor:
        a = self.const(a)
        shifted = a.data - a.data.max(axis=1, keepdims=True)
        out = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        p = np.exp(out)

        def back(g):
            self._acc(a, g - p * g.sum(axis=1, keepdims=True))
        return self._out(out, (a,), back, "log_softmax")

    def nll(self, logp, index, labels) -> Tensor:
        """Mean negative log-likelihood over the rows in ``index``."""
        logp = self.const(logp)
        index = np.asarray(index, dtype=np.int64)
        labels = np.asarray(labels, dtype=np.int64)
        if index.size == 0:
            raise ValueError("empty mask")
        val = -logp.data[index, labels].mean()

        def back(g):
            gl = np.zeros_like(logp.data)
            np.add.at(gl, (index, labels), -float(g) / index.size)
            self._acc(logp, gl)
        return self._out(np.array(val), (logp,), back, "nll")

    # -- graph / edge operations --------------------------------------------

    def gather(self, a, idx) -> Tensor:
        """Rows ``a[idx]`` (1-D or 2-D ``a``)."""
        a = self.const(a)
        idx = np.asarray(idx, dtype=np.int64)
        n = a.data.shape[0]

        def back(g):
            if g.ndim == 1:
                self._acc(a, np.bincount(idx, weights=g, minlength=n))
            else:
                s = sp.csr_matrix((np.ones(idx.size), (idx, np.arange(idx.size))),
                                  shape=(n, idx.size))
                self._acc(a, np.asarray(s @ g))
        return self._out(a.data[idx], (a,), back, "gather")

    def row_normalize(self, a, eps=0.0) -> Tensor:
        """``a_i / ||a_i||``; all-zero rows stay zero."""
        a = self.const(a)
        norm = np.sqrt((a.data ** 2).sum(axis=1, keepdims=True))
        safe = norm > eps
        inv = np.where(safe, 1.0 / np.where(safe, norm, 1.0), 0.0)
        u = a.data * inv

        def back(g):
            proj = (g * u).sum(axis=1, keepdims=True)
            self._acc(a, (g - u * proj) * inv)
        return self._out(u, (a,), back, "row_normalize")

    def rowdot(self, a, b) -> Tensor:
        a, b = self.const(a), self.const(b)

        def back(g):
            self._acc(a, g[:, None] * b.data)
            self._acc(b, g[:, None] * a.data)
        return self._out((a.data * b.data).sum(axis=1), (a, b), back, "rowdot")

    def edge_dot(self, a, indptr, cols) -> Tensor:
        """``<a_i, a_j>`` for every edge ``(i, j)`` of a CSR pattern."""
        a = self.const(a)
        indptr = np.asarray(indptr, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        n = indptr.size - 1
        rows = np.repeat(np.arange(n), np.diff(indptr))
        val = np.einsum("ij,ij->i", a.data[rows], a.data[cols])

        def back(g):
            m = sp.csr_matrix((g, cols, indptr), shape=(n, a.data.shape[0]))
            self._acc(a, np.asarray(m @ a.data) + np.asarray(m.T @ a.data))
        return self._out(val, (a,), back, "edge_dot")

    def segment_softmax(self, e, indptr) -> Tensor:
        """Softmax of edge scores within each CSR row segment."""
        e = self.const(e)
        indptr = np.asarray(indptr, dtype=np.int64)
        lens = np.diff(indptr)
        nonempty = lens > 0
        starts = indptr[:-1][nonempty]
        seg = np.repeat(np.arange(lens.size), lens)
        mx = np.zeros(lens.size)
        if starts.size:
            mx[nonempty] = np.maximum.reduceat(e.data, starts)
        ex = np.exp(e.data - mx[seg])
        tot = np.zeros(lens.size)
        if starts.size:
            tot[nonempty] = np.add.reduceat(ex, starts)
        alpha = ex / tot[seg]

        def back(g):
            s = np.zeros(lens.size)
            if starts.size:
                s[nonempty] = np.add.reduceat(alpha * g, starts)
            self._acc(e, alpha * (g - s[seg]))
        return self._out(alpha, (e,), back, "segment_softmax")

    def edge_aggregate(self, w, h, indptr, cols) -> Tensor:
        """``out_i = sum_e w_e h[cols_e]`` over the edges of row ``i`` (CSR layout)."""
        w, h = self.const(w), self.const(h)
        indptr = np.asarray(indptr, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        n = indptr.size - 1
        m = sp.csr_matrix((w.data, cols, indptr), shape=(n, h.data.shape[0]))
        rows = np.repeat(np.arange(n), np.diff(indptr))

        def back(g):
            if h.requires_grad:
                self._acc(h, np.asarray(m.T.tocsr() @ g))
            if w.requires_grad:
                self._acc(w, (g[rows] * h.data[cols]).sum(axis=1))
        return self._out(np.asarray(m @ h.data), (w, h), back, "edge_aggregate")
