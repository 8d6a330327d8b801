"""Two-layer GNN classifiers (GCN, ChebNet, GraphSAGE-mean, AGNN, GAT).

Architecture: Conv1 (in -> hidden) -> ReLU -> dropout -> Conv2 (hidden -> 2)
-> log-softmax, trained full batch with NLL loss and Adam (coupled L2 weight
decay). For AGNN, Conv1 is a dense layer and Conv2 is one learnable-beta
attention propagation followed by a dense layer.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .._rng import child_seed, substream
from .._validation import check_binary_labels, check_features, check_index_set
from ..containers import read_checkpoint, write_checkpoint
from ..graph import DirectedGraph
from .autograd import Tape, Tensor
from .layers import (VARIANTS, GraphOperators, agnn_layer, cheb_layer, gat_layer, gcn_layer,
                     glorot, sage_mean_layer)

logger = logging.getLogger(__name__)

N_CLASSES = 2


@dataclass
class TrainConfig:
    variant: str = "agnn"
    hidden: int = 32
    epochs: int = 200
    lr: float = 0.01
    weight_decay: float = 5e-4
    dropout: float = 0.2
    cheb_k: int = 2
    heads: int = 1
    out_heads: int = 1
    leaky_slope: float = 0.2
    sage_sample: int | None = None
    agnn_props: int = 1
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.variant == "cheb" and self.cheb_k < 1:
            raise ValueError("cheb_k must be >= 1")
        if self.variant == "gat" and (self.heads < 1 or self.hidden % self.heads):
            raise ValueError("hidden must be divisible by heads")
        if self.variant == "agnn" and self.agnn_props < 1:
            raise ValueError("agnn_props must be >= 1")
        self.betas = tuple(self.betas)


@dataclass
class GnnModel:
    config: TrainConfig
    in_dim: int
    params: dict[str, np.ndarray]
    adam: dict = field(default_factory=dict)


def init_params(cfg: TrainConfig, in_dim: int) -> dict[str, np.ndarray]:
    rng = substream(cfg.seed, "gnn.init")
    h, c = cfg.hidden, N_CLASSES
    p: dict[str, np.ndarray] = {}
    if cfg.variant == "gcn":
        p["conv1.W"] = glorot(rng, in_dim, h)
        p["conv2.W"] = glorot(rng, h, c)
    elif cfg.variant == "cheb":
        for k in range(cfg.cheb_k):
            p[f"conv1.W{k}"] = glorot(rng, in_dim, h)
        for k in range(cfg.cheb_k):
            p[f"conv2.W{k}"] = glorot(rng, h, c)
    elif cfg.variant == "sage":
        p["conv1.W_self"] = glorot(rng, in_dim, h)
        p["conv1.W_neigh"] = glorot(rng, in_dim, h)
        p["conv2.W_self"] = glorot(rng, h, c)
        p["conv2.W_neigh"] = glorot(rng, h, c)
    elif cfg.variant == "agnn":
        p["conv1.W"] = glorot(rng, in_dim, h)
        for k in range(cfg.agnn_props):
            p[f"conv2.beta{k}"] = np.ones(1)
        p["conv2.W"] = glorot(rng, h, c)
    elif cfg.variant == "gat":
        hd = h // cfg.heads
        for k in range(cfg.heads):
            p[f"conv1.W{k}"] = glorot(rng, in_dim, hd)
            p[f"conv1.a_src{k}"] = glorot(rng, hd, 1)
            p[f"conv1.a_dst{k}"] = glorot(rng, hd, 1)
        for k in range(cfg.out_heads):
            p[f"conv2.W{k}"] = glorot(rng, h, c)
            p[f"conv2.a_src{k}"] = glorot(rng, c, 1)
            p[f"conv2.a_dst{k}"] = glorot(rng, c, 1)
    p["conv1.b"] = np.zeros((1, h))
    p["conv2.b"] = np.zeros((1, c))
    return p


def _conv(tape, cfg, ops, layer, x, P, sage_op):
    pre = f"conv{layer}."
    b = P[pre + "b"]
    v = cfg.variant
    if v == "gcn":
        return gcn_layer(tape, ops, x, P[pre + "W"], b)
    if v == "cheb":
        return cheb_layer(tape, ops, x, [P[f"{pre}W{k}"] for k in range(cfg.cheb_k)], b)
    if v == "sage":
        return sage_mean_layer(tape, sage_op, x, P[pre + "W_self"], P[pre + "W_neigh"], b)
    if v == "agnn":
        if layer == 1:
            return tape.add(tape.matmul(x, P[pre + "W"]), b)
        for k in range(cfg.agnn_props):
            x = agnn_layer(tape, ops, x, P[f"{pre}beta{k}"])
        return tape.add(tape.matmul(x, P[pre + "W"]), b)
    if v == "gat":
        n_heads = cfg.heads if layer == 1 else cfg.out_heads
        heads = [(P[f"{pre}W{k}"], P[f"{pre}a_src{k}"], P[f"{pre}a_dst{k}"]) for k in range(n_heads)]
        return gat_layer(tape, ops, x, heads, cfg.leaky_slope, concat=(layer == 1), b=b)
    raise AssertionError(v)


def forward(model: GnnModel, ops: GraphOperators, X, training: bool = False,
            rng: np.random.Generator | None = None, epoch: int = 0,
            tape: Tape | None = None, tensors: dict[str, Tensor] | None = None) -> Tensor:
    """Log-probabilities ``(n, 2)``. Pass ``tape``/``tensors`` to differentiate."""
    cfg = model.config
    X = np.asarray(X, dtype=np.float64)
    if X.shape != (ops.num_nodes, model.in_dim):
        raise ValueError(f"X has shape {X.shape}, expected ({ops.num_nodes}, {model.in_dim})")
    tape = tape or Tape()
    P = tensors if tensors is not None else {k: Tensor(v) for k, v in model.params.items()}
    sage_op = None
    if cfg.variant == "sage":
        sample = cfg.sage_sample if training else None
        sage_op = ops.sampled_mean(sample, child_seed(cfg.seed, "sage"), epoch)
    h = _conv(tape, cfg, ops, 1, tape.const(X), P, sage_op)
    h = tape.relu(h)
    if training and cfg.dropout > 0:
        h = tape.dropout(h, cfg.dropout, rng, True)
    z = _conv(tape, cfg, ops, 2, h, P, sage_op)
    return tape.log_softmax(z)


def nll_loss(tape: Tape, log_probs: Tensor, labels, mask) -> Tensor:
    idx = np.asarray(mask)
    if idx.dtype == bool:
        idx = np.flatnonzero(idx)
    if idx.size == 0:
        raise ValueError("empty mask")
    return tape.nll(log_probs, idx, np.asarray(labels)[idx])


def adam_step(params: dict, grads: dict, state: dict, cfg: TrainConfig) -> None:
    """Bias-corrected Adam with L2 decay added to the gradient; updates in place."""
    b1, b2 = cfg.betas
    t = state["t"] = state.get("t", 0) + 1
    m, v = state.setdefault("m", {}), state.setdefault("v", {})
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for k, p in params.items():
        g = grads.get(k)
        if g is None:
            g = np.zeros_like(p)
        if cfg.weight_decay:
            g = g + cfg.weight_decay * p
        m[k] = b1 * m.get(k, 0.0) + (1.0 - b1) * g
        v[k] = b2 * v.get(k, 0.0) + (1.0 - b2) * g * g
        denom = np.sqrt(v[k]) / np.sqrt(c2) + cfg.eps
        params[k] = p - (cfg.lr / c1) * m[k] / denom


def loss_and_grads(model: GnnModel, ops, X, labels, idx, training=False, rng=None, epoch=0):
    tape = Tape()
    tensors = {k: Tensor(v, requires_grad=True, name=k) for k, v in model.params.items()}
    logp = forward(model, ops, X, training, rng, epoch, tape, tensors)
    loss = nll_loss(tape, logp, labels, idx)
    tape.backward(loss)
    grads = {k: (t.grad if t.grad is not None else np.zeros_like(t.data))
             for k, t in tensors.items()}
    return float(loss.data), grads


def train(model: GnnModel, ops: GraphOperators, X, labels, train_idx, val_idx=None):
    """Full-batch training; keeps the parameters with the lowest validation loss.

    Returns ``(model, curve)`` where ``curve`` is a list of
    ``(epoch, train_loss, val_loss)`` (val_loss is NaN without a validation set).
    """
    cfg = model.config
    labels = np.asarray(labels)
    train_idx = np.asarray(train_idx, dtype=np.int64)
    val_idx = np.zeros(0, dtype=np.int64) if val_idx is None else np.asarray(val_idx, dtype=np.int64)
    if np.intersect1d(train_idx, val_idx).size:
        raise ValueError("train and validation masks overlap")
    if np.unique(labels[train_idx]).size < 2:
        logger.warning("training labels contain a single class")
    rng = substream(cfg.seed, "gnn.dropout")
    best_val, best = np.inf, None
    curve = []
    for epoch in range(cfg.epochs):
        loss, grads = loss_and_grads(model, ops, X, labels, train_idx, True, rng, epoch)
        adam_step(model.params, grads, model.adam, cfg)
        val_loss = float("nan")
        if val_idx.size:
            logp = forward(model, ops, X, False).data
            val_loss = float(-logp[val_idx, labels[val_idx]].mean())
            if val_loss < best_val:
                best_val = val_loss
                best = {k: v.copy() for k, v in model.params.items()}
        curve.append((epoch, loss, val_loss))
    if best is not None:
        model.params = best
    return model, curve


def predict(model: GnnModel, ops: GraphOperators, X):
    """Per-node class and hateful-class probability."""
    p = np.exp(forward(model, ops, X, False).data)
    return p.argmax(axis=1), p[:, 1]


def stratified_holdout(labels, idx, fraction, seed):
    """Split ``idx`` into (train, validation) keeping the class ratio."""
    if fraction <= 0:
        return idx, idx[:0]
    rng = substream(seed, "gnn.validation")
    train, val = [], []
    for c in (0, 1):
        members = idx[labels[idx] == c]
        members = members[rng.permutation(members.size)]
        k = int(np.floor(fraction * members.size))
        if members.size - k < 1:
            k = max(members.size - 1, 0)
        val.append(members[:k])
        train.append(members[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(val))


class GNNClassifier(ClassifierMixin, BaseEstimator):
    """Semi-supervised node classifier over a fixed graph.

    ``fit(X, y, graph=g)`` takes features for every node and labels with
    ``-1`` for unlabeled nodes; unlabeled nodes take part in propagation but
    never in the loss. A stratified ``validation_fraction`` of the labeled
    nodes (or an explicit ``val_idx``) drives best-epoch selection.
    ``predict(X, graph=None)`` scores every node of the fitted graph or of a
    new graph (zero-shot transfer).
    """

    _requires_graph = True

    def __init__(self, variant="agnn", hidden=32, epochs=200, lr=0.01, weight_decay=5e-4,
                 dropout=0.2, cheb_k=2, heads=1, leaky_slope=0.2, sage_sample=None,
                 agnn_props=1, standardize=True, symmetrize=True, validation_fraction=0.2, random_state=0):
        self.variant = variant
        self.hidden = hidden
        self.epochs = epochs
        self.lr = lr
        self.weight_decay = weight_decay
        self.dropout = dropout
        self.cheb_k = cheb_k
        self.heads = heads
        self.leaky_slope = leaky_slope
        self.sage_sample = sage_sample
        self.agnn_props = agnn_props
        self.standardize = standardize
        self.symmetrize = symmetrize
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def _config(self) -> TrainConfig:
        return TrainConfig(
            variant=self.variant, hidden=self.hidden, epochs=self.epochs, lr=self.lr,
            weight_decay=self.weight_decay, dropout=self.dropout, cheb_k=self.cheb_k,
            heads=self.heads, leaky_slope=self.leaky_slope, sage_sample=self.sage_sample,
            agnn_props=self.agnn_props, seed=self.random_state,
        )

    def operators(self, graph: DirectedGraph) -> GraphOperators:
        return GraphOperators(graph, symmetric=self.symmetrize)

    def fit(self, X, y, graph: DirectedGraph | GraphOperators = None, val_idx=None):
        if graph is None:
            raise ValueError("GNNClassifier.fit needs graph=")
        ops = graph if isinstance(graph, GraphOperators) else self.operators(graph)
        X = check_features(X, n_rows=ops.num_nodes)
        y = check_binary_labels(y, allow_unlabeled=True)
        if y.shape[0] != ops.num_nodes:
            raise ValueError("y must have one entry per node (-1 for unlabeled)")
        labeled = np.flatnonzero(y >= 0)
        if val_idx is None:
            train_idx, val_idx = stratified_holdout(y, labeled, self.validation_fraction,
                                                    self.random_state)
        else:
            val_idx = check_index_set(val_idx, ops.num_nodes, "val_idx")
            train_idx = np.setdiff1d(labeled, val_idx)
        if train_idx.size == 0:
            raise ValueError("no labeled training nodes")
        self.feature_mean_ = X.mean(axis=0) if self.standardize else np.zeros(X.shape[1])
        sd = X.std(axis=0) if self.standardize else np.ones(X.shape[1])
        self.feature_scale_ = np.where(sd > 0, sd, 1.0)
        cfg = self._config()
        model = GnnModel(cfg, X.shape[1], init_params(cfg, X.shape[1]))
        self.model_, self.loss_curve_ = train(model, ops, self._scale(X), y, train_idx, val_idx)
        self.operators_ = ops
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        self.train_idx_, self.val_idx_ = train_idx, val_idx
        return self

    def _scale(self, X):
        return (X - self.feature_mean_) / self.feature_scale_

    def _ops_for(self, graph):
        if graph is None:
            if self.operators_ is None:
                raise ValueError("no graph bound to this model; pass graph=")
            return self.operators_
        if isinstance(graph, GraphOperators):
            return graph
        return self.operators(graph)

    def predict_log_proba(self, X, graph=None):
        check_is_fitted(self, "model_")
        ops = self._ops_for(graph)
        X = check_features(X, n_rows=ops.num_nodes)
        if X.shape[1] != self.model_.in_dim:
            raise ValueError(f"X has {X.shape[1]} features, model expects {self.model_.in_dim}")
        return forward(self.model_, ops, self._scale(X), False).data

    def predict_proba(self, X, graph=None):
        return np.exp(self.predict_log_proba(X, graph))

    def predict(self, X, graph=None):
        return self.predict_log_proba(X, graph).argmax(axis=1)

    # -- persistence --------------------------------------------------------

    def save(self, path) -> None:
        check_is_fitted(self, "model_")
        config = {"estimator": self.get_params(), "train_config": asdict(self.model_.config),
                  "in_dim": self.model_.in_dim}
        tensors = dict(self.model_.params)
        tensors["input.mean"] = self.feature_mean_
        tensors["input.scale"] = self.feature_scale_
        write_checkpoint(path, config, tensors)

    @classmethod
    def load(cls, path, graph: DirectedGraph | None = None) -> "GNNClassifier":
        config, tensors = read_checkpoint(path)
        est = cls(**config["estimator"])
        tc = dict(config["train_config"])
        est.feature_mean_ = tensors.pop("input.mean")
        est.feature_scale_ = tensors.pop("input.scale")
        est.model_ = GnnModel(TrainConfig(**tc), int(config["in_dim"]), tensors)
        est.classes_ = np.array([0, 1])
        est.n_features_in_ = est.model_.in_dim
        est.operators_ = est.operators(graph) if graph is not None else None
        return est


def write_loss_curve(curve, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,train_loss,val_loss\n")
        for epoch, tr, va in curve:
            fh.write(f"{epoch},{tr!r},{va!r}\n")
