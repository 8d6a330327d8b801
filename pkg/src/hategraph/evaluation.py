"""Cross-validated benchmarks, transfer evaluation and diagnostics.

Fold plans are stratified k-fold splits of the labeled nodes. Inside each
fold, training subsets for the label fractions ``m`` are prefixes of one
class-interleaved ordering of the fold's training side, so subsets are
nested and each prefix keeps the class ratio to within one instance.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import clone

from ._rng import substream
from ._validation import check_binary_labels, check_features
from .graph import DirectedGraph
from .posthoc import Lexicon, post_tokens
from .text.corpus import UserCorpus

logger = logging.getLogger(__name__)

DEFAULT_FRACTIONS = (5, 10, 15, 20, 50, 80)
REPORT_COLUMNS = ("model", "m", "fold", "class", "precision", "recall", "f1", "macro_f1",
                  "accuracy", "seed")


# -------------------------------------------------------------------------
# fold plans


def subset_size(m, n_labeled: int) -> int:
    """``floor(m / 100 * n_labeled)`` in exact arithmetic."""
    return math.floor(Fraction(str(m)) * n_labeled / 100)


def _interleave(groups: Sequence[np.ndarray]) -> np.ndarray:
    """Merge groups so that every prefix holds each group in proportion.

    Member ``j`` of a group of size ``n`` sits at fractional position
    ``(j + 0.5) / n``; ties go to the earlier group.
    """
    keys, order, items = [], [], []
    for g, members in enumerate(groups):
        n = members.size
        keys.append((np.arange(n) + 0.5) / max(n, 1))
        order.append(np.full(n, g))
        items.append(members)
    keys = np.concatenate(keys) if keys else np.zeros(0)
    order = np.concatenate(order) if order else np.zeros(0, dtype=np.int64)
    items = np.concatenate(items) if items else np.zeros(0, dtype=np.int64)
    return items[np.lexsort((order, keys))]


@dataclass(frozen=True)
class FoldPlan:
    labels: np.ndarray
    k: int
    fractions: tuple
    seed: int
    test_folds: tuple
    train_orders: tuple

    @property
    def labeled(self) -> np.ndarray:
        return np.flatnonzero(self.labels >= 0)

    @property
    def n_labeled(self) -> int:
        return int((self.labels >= 0).sum())

    def test(self, fold: int) -> np.ndarray:
        return self.test_folds[fold]

    def train_side(self, fold: int) -> np.ndarray:
        return np.sort(self.train_orders[fold])

    def train(self, fold: int, m) -> np.ndarray:
        size = subset_size(m, self.n_labeled)
        order = self.train_orders[fold]
        if size > order.size:
            raise ValueError(f"m={m} needs {size} training nodes; fold {fold} has {order.size}")
        return np.sort(order[:size])

    def cells(self):
        for m in self.fractions:
            for fold in range(self.k):
                yield m, fold


def make_fold_plan(labels, k: int = 5, fractions: Sequence = DEFAULT_FRACTIONS,
                   seed: int = 0) -> FoldPlan:
    """Stratified ``k``-fold plan over the nodes with a label (``-1`` = unlabeled)."""
    labels = check_binary_labels(labels, allow_unlabeled=True)
    if k < 2:
        raise ValueError("k must be >= 2")
    fractions = tuple(fractions)
    for m in fractions:
        if not 0 < float(m) <= 100:
            raise ValueError(f"label fraction {m} outside (0, 100]")
    rng = substream(seed, "folds.assign")
    by_class = []
    for c in (0, 1):
        members = np.flatnonzero(labels == c)
        if members.size < k:
            raise ValueError(f"class {c} has {members.size} labeled nodes; need at least k={k}")
        by_class.append(members[rng.permutation(members.size)])
    sequence = np.concatenate(by_class)
    fold_of = np.arange(sequence.size) % k
    test_folds = tuple(np.sort(sequence[fold_of == f]) for f in range(k))

    orders = []
    for f in range(k):
        frng = substream(seed, f"folds.train{f}")
        groups = []
        for c in (0, 1):
            members = np.setdiff1d(np.flatnonzero(labels == c), test_folds[f])
            groups.append(members[frng.permutation(members.size)])
        orders.append(_interleave(groups))
    plan = FoldPlan(labels.copy(), k, fractions, int(seed), test_folds, tuple(orders))
    for m in fractions:
        for f in range(k):
            plan.train(f, m)        # raises when a fraction does not fit
    return plan


# -------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class MetricsReport:
    precision: tuple
    recall: tuple
    f1: tuple
    support: tuple
    macro_f1: float
    accuracy: float
    model: str = ""
    m: float | None = None
    fold: int | None = None
    seed: int | None = None

    def with_meta(self, **meta) -> "MetricsReport":
        fields = {**self.__dict__, **meta}
        return MetricsReport(**fields)

    def rows(self) -> list[list]:
        return [[self.model, "" if self.m is None else self.m, "" if self.fold is None else self.fold,
                 c, self.precision[c], self.recall[c], self.f1[c], self.macro_f1, self.accuracy,
                 "" if self.seed is None else self.seed] for c in (0, 1)]

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def macro_metrics(y_true, y_pred, **meta) -> MetricsReport:
    """Per-class precision/recall/F1 (0 for empty denominators), macro-F1 and accuracy."""
    y_true = check_binary_labels(y_true)
    y_pred = check_binary_labels(y_pred)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred differ in length")
    if y_true.size == 0:
        raise ValueError("empty input")
    cm = np.bincount(2 * y_true + y_pred, minlength=4).reshape(2, 2)
    precision, recall, f1 = [], [], []
    for c in (0, 1):
        tp = cm[c, c]
        p = _ratio(tp, cm[:, c].sum())
        r = _ratio(tp, cm[c, :].sum())
        precision.append(float(p))
        recall.append(float(r))
        f1.append(float(_ratio(2 * p * r, p + r)))
    return MetricsReport(tuple(precision), tuple(recall), tuple(f1),
                         (int(cm[0].sum()), int(cm[1].sum())),
                         float((f1[0] + f1[1]) / 2), float(np.trace(cm) / y_true.size), **meta)


# -------------------------------------------------------------------------
# benchmark


@dataclass
class ModelSpec:
    """A named estimator; ``features`` replaces the shared feature matrix."""

    name: str
    estimator: object
    features: np.ndarray | None = None


def _needs_graph(est) -> bool:
    return bool(getattr(est, "_requires_graph", False))


def fit_predict(est, X, labels, train_idx, graph=None) -> np.ndarray:
    """Fit on ``train_idx`` and predict every row of ``X``."""
    if _needs_graph(est):
        y = np.full(labels.shape[0], -1, dtype=np.int64)
        y[train_idx] = labels[train_idx]
        est.fit(X, y, graph=graph)
        return np.asarray(est.predict(X))
    est.fit(X[train_idx], labels[train_idx])
    return np.asarray(est.predict(X))


@dataclass
class BenchmarkResult:
    reports: list[MetricsReport] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)

    def summary(self) -> dict:
        """Mean and standard deviation of macro-F1 over folds per (model, m)."""
        cells: dict[str, dict] = {}
        for r in self.reports:
            cells.setdefault(r.model, {}).setdefault(r.m, []).append(r.macro_f1)
        out = {}
        for model, by_m in cells.items():
            out[model] = {
                str(m): {"mean_macro_f1": float(np.mean(v)), "std_macro_f1": float(np.std(v)),
                         "folds": len(v)}
                for m, v in by_m.items()
            }
        return out

    def mean_macro_f1(self, model: str, m) -> float:
        vals = [r.macro_f1 for r in self.reports if r.model == model and r.m == m]
        if not vals:
            raise KeyError(f"no reports for model={model!r}, m={m}")
        return float(np.mean(vals))

    def write_csv(self, path) -> None:
        write_report_csv(self.reports, path)

    def write_summary(self, path, extra: dict | None = None) -> None:
        doc = {"summary": self.summary(), "errors": self.errors}
        if extra:
            doc.update(extra)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def run_benchmark(specs: Sequence[ModelSpec], X, labels, plan: FoldPlan,
                  graph: DirectedGraph | None = None, seed: int | None = None,
                  progress=None) -> BenchmarkResult:
    """Evaluate every model on every ``(m, fold)`` cell of ``plan``.

    All models see the same folds. Semi-supervised models receive features
    for every node but labels only for the cell's training subset. A model
    that raises is logged and skipped for that cell.
    """
    labels = check_binary_labels(labels, allow_unlabeled=True)
    X = check_features(X, n_rows=labels.shape[0])
    seed = plan.seed if seed is None else seed
    result = BenchmarkResult()
    for spec in specs:
        feats = X if spec.features is None else check_features(spec.features, n_rows=labels.shape[0])
        for m, fold in plan.cells():
            est = clone(spec.estimator)
            if "random_state" in est.get_params():
                est.set_params(random_state=seed)
            test = plan.test(fold)
            try:
                if _needs_graph(est) and graph is None:
                    raise ValueError(f"{spec.name} needs a graph")
                pred = fit_predict(est, feats, labels, plan.train(fold, m), graph)
                rep = macro_metrics(labels[test], pred[test], model=spec.name, m=m, fold=fold,
                                    seed=seed)
            except Exception as exc:        # keep sweeping the other cells
                logger.error("%s m=%s fold=%d failed: %s", spec.name, m, fold, exc)
                result.errors.append({"model": spec.name, "m": m, "fold": fold,
                                      "error": f"{type(exc).__name__}: {exc}"})
                continue
            result.reports.append(rep)
            if progress is not None:
                progress(rep)
    return result


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_report_csv(reports: Iterable[MetricsReport], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for rep in reports:
            for row in rep.rows():
                w.writerow([_fmt(v) for v in row])


# -------------------------------------------------------------------------
# transfer and diagnostics


def n_features_of(model) -> int | None:
    return getattr(model, "n_features_in_", None)


def cross_platform_eval(model, X_target, labels_target, graph_target: DirectedGraph | None = None,
                        name: str = "", seed: int | None = None) -> MetricsReport:
    """Score a trained model on another platform without any target supervision.

    ``X_target`` must come from the source feature extractor (for doc2vec,
    vectors inferred under the source model). Only labeled target nodes are
    scored; their labels are never shown to the model.
    """
    labels_target = check_binary_labels(labels_target, allow_unlabeled=True)
    X_target = check_features(X_target, n_rows=labels_target.shape[0])
    expected = n_features_of(model)
    if expected is not None and X_target.shape[1] != expected:
        raise ValueError(f"target features have {X_target.shape[1]} dims, model expects {expected}")
    if _needs_graph(model):
        if graph_target is None:
            raise ValueError("graph model needs graph_target")
        if graph_target.num_nodes != X_target.shape[0]:
            raise ValueError("graph_target and X_target disagree on the node count")
        pred = np.asarray(model.predict(X_target, graph=graph_target))
    else:
        pred = np.asarray(model.predict(X_target))
    scored = np.flatnonzero(labels_target >= 0)
    if scored.size == 0:
        raise ValueError("target has no labeled nodes")
    return macro_metrics(labels_target[scored], pred[scored], model=name, seed=seed)


@dataclass(frozen=True)
class SwapResult:
    hate_retained: float
    normal_retained: float
    hate_correct: int
    normal_correct: int

    @property
    def gap(self) -> float:
        return self.hate_retained - self.normal_retained


def _predict(model, X, graph):
    if _needs_graph(model):
        return np.asarray(model.predict(X, graph=graph))
    return np.asarray(model.predict(X))


def embedding_swap_diagnostic(model, X, labels, hate_idx, normal_idx,
                              graph: DirectedGraph | None = None,
                              donor: str = "opposite") -> SwapResult:
    """Share of correct predictions that survive replacing a class's features.

    Every node in ``hate_idx`` gets the mean feature row of ``normal_idx``
    (and, in a second pass, the reverse). The graph is untouched. The
    result is the fraction of nodes predicted correctly before the swap
    that are still correct after it. ``donor="self"`` keeps each node's own
    row, which leaves every prediction unchanged.
    """
    X = check_features(X)
    labels = np.asarray(labels)
    hate_idx = np.asarray(hate_idx, dtype=np.int64)
    normal_idx = np.asarray(normal_idx, dtype=np.int64)
    if hate_idx.size == 0 or normal_idx.size == 0:
        raise ValueError("both class sets must be non-empty")
    if donor not in ("opposite", "self"):
        raise ValueError("donor must be 'opposite' or 'self'")
    base = _predict(model, X, graph)
    out = []
    for target, other in ((hate_idx, normal_idx), (normal_idx, hate_idx)):
        correct = target[base[target] == labels[target]]
        X_swap = X.copy()
        if donor == "opposite":
            X_swap[target] = X[other].mean(axis=0)
        pred = _predict(model, X_swap, graph)
        kept = int((pred[correct] == labels[correct]).sum())
        out.append((kept / correct.size if correct.size else float("nan"), int(correct.size)))
    return SwapResult(out[0][0], out[1][0], out[0][1], out[1][1])


def neighbor_composition(g: DirectedGraph, values, node: int, radius: int = 1) -> float | None:
    """Fraction of hateful nodes among those within ``radius`` hops (either direction).

    The node itself and nodes with an unknown value (``-1``) are left out.
    Returns ``None`` when nothing is left.
    """
    if not 0 <= node < g.num_nodes:
        raise ValueError(f"node {node} not in graph")
    if radius < 1:
        raise ValueError("radius must be >= 1")
    values = np.asarray(values)
    a = g.to_scipy()
    und = (a + a.T).tocsr()
    seen = {node}
    frontier = deque([(node, 0)])
    while frontier:
        u, d = frontier.popleft()
        if d == radius:
            continue
        for v in und.indices[und.indptr[u]:und.indptr[u + 1]]:
            v = int(v)
            if v not in seen:
                seen.add(v)
                frontier.append((v, d + 1))
    seen.discard(node)
    known = [v for v in seen if values[v] >= 0]
    if not known:
        return None
    return float(np.mean([values[v] == 1 for v in known]))


def hl_post_rate(corpus: UserCorpus, lexicon: Lexicon | dict, user: str) -> float:
    """Percent of the user's posts containing at least one lexicon term."""
    if not isinstance(lexicon, Lexicon):
        lexicon = Lexicon(lexicon)
    posts = corpus.posts.get(user)
    if not posts:
        raise ValueError(f"user {user!r} has no posts")
    hits = sum(1 for p in posts if lexicon.matches(post_tokens(p)))
    return 100.0 * hits / len(posts)
