"""Command-line pipeline.

    hategraph synth      generate a synthetic dataset
    hategraph embed      train user features (doc2vec, pretrained mean, node embeddings)
    hategraph train      fit one model on every labeled node
    hategraph benchmark  k-fold sweep over label fractions
    hategraph transfer   train on one dataset, score another with no target labels
    hategraph posthoc    monthly snapshots, sticky labels, target communities, hashtags
    hategraph seeds      belief diffusion from seed users and tiered sampling

Configuration is one JSON document; flags override it and it overrides the
defaults. Every run writes ``manifest.json`` with the resolved config, the
seed and SHA-256 hashes of inputs and outputs. Validation failures exit with
status 2 after printing an error JSON on stderr.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from ._rng import child_seed
from .containers import write_embedding
from .evaluation import (DEFAULT_FRACTIONS, ModelSpec, cross_platform_eval, make_fold_plan,
                         run_benchmark, write_report_csv)
from .gnn import VARIANTS, GNNClassifier
from .gnn.model import write_loss_curve
from .graph import DirectedGraph, read_edge_tsv
from .nodeembed import DeepWalk, Node2Vec
from .posthoc import Lexicon, build_snapshots, read_edge_times_tsv, sticky_labels, target_report
from .seeds import (build_belief_network, diffuse, kmeans_1d, lexicon_seeds, sample_tiers,
                    write_belief_csv)
from .synth import SynthConfig, generate, read_labels_csv
from .text import Doc2Vec, LogisticRegression, build_documents, read_posts_jsonl
from .text.wordvec import MeanEmbeddingVectorizer

logger = logging.getLogger("hategraph")

EXIT_INVALID = 2
MODELS = VARIANTS + ("logistic", "deepwalk", "node2vec")
FEATURE_SOURCES = ("doc2vec", "pretrained-mean", "node-embed")

DEFAULTS: dict = {
    "seed": 0,
    "out": "hategraph-out",
    "dataset": {"dir": None, "synth": None},
    "target": {"dir": None, "synth": None},
    "features": {
        "source": "doc2vec",
        "doc2vec": {},
        "word_vectors": None,
        "node_embed": {"method": "deepwalk"},
    },
    "model": {"name": "agnn", "params": {}},
    "models": ["logistic", "gcn", "cheb", "sage", "agnn", "gat"],
    "folds": {"k": 5, "fractions": list(DEFAULT_FRACTIONS)},
    "posthoc": {"start_month": None, "months": None, "min_posts": 10, "min_count": 10,
                "ratio": 0.2, "tracked": ["Jews", "Muslims", "Blacks"]},
    "seeds": {"seed_users": None, "min_hl_posts": None, "iterations": 5, "per_tier": 300, "min_posts": 10},
}


class ConfigError(ValueError):
    pass


class InputMissing(ConfigError):
    def __init__(self, path, what="input"):
        super().__init__(f"{what} not found: {path}")
        self.path = str(path)


# -------------------------------------------------------------------------
# config


def _merge(base: dict, over: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if key not in base:
            raise ConfigError(f"unknown config key {where}{key!r}")
        if isinstance(base[key], dict) and isinstance(val, dict) and key not in ("params",):
            if key in ("doc2vec", "synth", "node_embed"):
                merged = dict(base[key] or {})
                merged.update(val)
                out[key] = merged
            else:
                out[key] = _merge(base[key], val, f"{where}{key}.")
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise InputMissing(p, "config file")
    try:
        doc = json.loads(p.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{p}: config must be a JSON object")
    return doc


def _parse_fractions(text: str) -> list:
    out = []
    for part in text.split(","):
        part = part.strip()
        try:
            v = float(part)
        except ValueError:
            raise ConfigError(f"bad fraction {part!r}") from None
        out.append(int(v) if v.is_integer() else v)
    return out


def resolve_config(args) -> dict:
    cfg = _merge(DEFAULTS, load_config(args.config))
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out"] = args.out
    if args.model is not None:
        names = [m.strip() for m in args.model.split(",") if m.strip()]
        if not names:
            raise ConfigError("--model needs at least one model name")
        cfg["models"] = names
        if names[0] != cfg["model"]["name"]:
            # file params were written for the file's model
            cfg["model"]["params"] = {}
        cfg["model"]["name"] = names[0]
    if args.fractions is not None:
        cfg["folds"]["fractions"] = _parse_fractions(args.fractions)
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed must be a non-negative integer")
    for name in cfg["models"] + [cfg["model"]["name"]]:
        if name not in MODELS and name != "random":
            raise ConfigError(f"unknown model {name!r}; expected one of {', '.join(MODELS)}")
    if cfg["features"]["source"] not in FEATURE_SOURCES:
        raise ConfigError(f"unknown feature source {cfg['features']['source']!r}")
    k = cfg["folds"]["k"]
    if not isinstance(k, int) or k < 2:
        raise ConfigError("folds.k must be an integer >= 2")
    for m in cfg["folds"]["fractions"]:
        if not isinstance(m, (int, float)) or not 0 < m <= 100:
            raise ConfigError(f"fraction {m!r} outside (0, 100]")


# -------------------------------------------------------------------------
# datasets


class Dataset:
    """Users, labels, follow graph and corpus of one platform."""

    def __init__(self, users, labels, graph: DirectedGraph, corpus, lexicon=None,
                 edge_times=None, reposts=None, start_month=None, months=None, files=None):
        self.users = users
        self.labels = labels
        self.graph = graph
        self.corpus = corpus
        self.lexicon = lexicon
        self.edge_times = edge_times
        self.reposts = reposts
        self.start_month = start_month
        self.months = months
        self.files = files or {}

    def documents(self):
        from .text.corpus import UserCorpus
        full = UserCorpus({u: list(self.corpus.posts.get(u, ())) for u in self.users})
        return build_documents(full)


def _need(path: Path, what: str) -> Path:
    if not path.is_file():
        raise InputMissing(path, what)
    return path


def load_dataset(section: dict, seed: int, role: str) -> Dataset:
    if section.get("synth") is not None:
        params = dict(section["synth"])
        names = {f.name for f in fields(SynthConfig)}
        bad = sorted(set(params) - names)
        if bad:
            raise ConfigError(f"unknown synth parameter(s): {', '.join(bad)}")
        params.setdefault("seed", child_seed(seed, f"synth.{role}"))
        scfg = SynthConfig(**params)
        scfg.validate()
        d = generate(scfg)
        edges = [(d.users[u], d.users[v], int(t))
                 for (u, v, _), t in zip(d.follows.edges(), d.follow_times)]
        return Dataset(list(d.users), d.labels.copy(), d.follows, d.corpus, Lexicon(d.lexicon),
                       edges, d.reposts, scfg.start_month, scfg.months)
    if section.get("dir") is None:
        raise ConfigError(f"config needs {role}.dir or {role}.synth")
    root = Path(section["dir"])
    if not root.is_dir():
        raise InputMissing(root, f"{role} directory")
    files = {
        "edges": _need(root / "edges.tsv", "edge file"),
        "posts": _need(root / "posts.jsonl", "posts file"),
        "labels": _need(root / "labels.csv", "labels file"),
    }
    label_map = read_labels_csv(files["labels"])
    corpus = read_posts_jsonl(files["posts"])
    users = list(label_map)
    extra = sorted(set(corpus.users) - set(label_map))
    users += extra
    labels = np.array([label_map.get(u, -1) for u in users], dtype=np.int64)
    graph = read_edge_tsv(files["edges"], nodes=users)
    lexicon = edge_times = reposts = None
    if (root / "lexicon.csv").is_file():
        files["lexicon"] = root / "lexicon.csv"
        lexicon = Lexicon.from_csv(files["lexicon"])
    if (root / "edge_times.tsv").is_file():
        files["edge_times"] = root / "edge_times.tsv"
        edge_times = read_edge_times_tsv(files["edge_times"])
    if (root / "reposts.tsv").is_file():
        files["reposts"] = root / "reposts.tsv"
        reposts = read_edge_tsv(files["reposts"], nodes=users)
    start_month = months = None
    if (root / "config.json").is_file():
        files["config"] = root / "config.json"
        meta = json.loads(files["config"].read_text("utf-8"))
        start_month, months = meta.get("start_month"), meta.get("months")
    return Dataset(users, labels, graph, corpus, lexicon, edge_times, reposts, start_month,
                   months, files)


# -------------------------------------------------------------------------
# run bookkeeping


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class Run:
    def __init__(self, command: str, cfg: dict):
        self.command = command
        self.cfg = cfg
        self.out = Path(cfg["out"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs: dict[str, Path] = {}
        self.inputs: dict[str, Path] = {}

    def path(self, key: str, name: str) -> Path:
        p = self.out / name
        self.outputs[key] = p
        return p

    def add_inputs(self, files: dict, prefix: str = "") -> None:
        for k, v in files.items():
            self.inputs[prefix + k] = Path(v)

    def write_manifest(self, extra: dict | None = None) -> Path:
        manifest = {
            "command": self.command,
            "version": __version__,
            "seed": self.cfg["seed"],
            "config": {k: v for k, v in self.cfg.items() if k != "out"},
            "inputs": {k: {"path": str(p), "sha256": sha256_file(p)}
                       for k, p in sorted(self.inputs.items())},
            "outputs": {k: {"path": p.name, "sha256": sha256_file(p)}
                        for k, p in sorted(self.outputs.items())},
        }
        if extra:
            manifest.update(extra)
        path = self.out / "manifest.json"
        _write_json(path, manifest)
        return path


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -------------------------------------------------------------------------
# features and models


def _doc2vec(cfg: dict) -> Doc2Vec:
    params = dict(cfg["features"]["doc2vec"])
    params.setdefault("random_state", child_seed(cfg["seed"], "doc2vec"))
    try:
        return Doc2Vec(**params)
    except TypeError as exc:
        raise ConfigError(f"features.doc2vec: {exc}") from None


def _node_embedder(cfg: dict, method: str | None = None):
    params = dict(cfg["features"]["node_embed"])
    method = method or params.pop("method", "deepwalk")
    params.pop("method", None)
    params.setdefault("random_state", child_seed(cfg["seed"], method))
    cls = {"deepwalk": DeepWalk, "node2vec": Node2Vec}.get(method)
    if cls is None:
        raise ConfigError(f"unknown node embedding method {method!r}")
    try:
        return cls(**params)
    except TypeError as exc:
        raise ConfigError(f"features.node_embed: {exc}") from None


def compute_features(cfg: dict, ds: Dataset):
    """Feature matrix plus the fitted extractor (for saving and transfer)."""
    source = cfg["features"]["source"]
    if source == "doc2vec":
        model = _doc2vec(cfg).fit(ds.documents())
        return model.dv_.astype(np.float64), model
    if source == "pretrained-mean":
        path = cfg["features"]["word_vectors"]
        if path is None:
            raise ConfigError("features.word_vectors is required for pretrained-mean")
        if not Path(path).is_file():
            raise InputMissing(path, "word vector file")
        vec = MeanEmbeddingVectorizer(path=path).fit()
        return vec.transform(ds.documents()), vec
    model = _node_embedder(cfg).fit(ds.graph)
    return model.embedding_.astype(np.float64), model


def make_estimator(name: str, cfg: dict, params: dict | None = None):
    params = dict(params or {})
    seed = child_seed(cfg["seed"], f"model.{name}")
    if name in VARIANTS:
        params.setdefault("random_state", seed)
        try:
            return GNNClassifier(variant=name, **params)
        except TypeError as exc:
            raise ConfigError(f"model params: {exc}") from None
    if name == "random":
        from sklearn.dummy import DummyClassifier
        return DummyClassifier(strategy="stratified", random_state=seed)
    params.setdefault("random_state", seed)
    try:
        return LogisticRegression(**params)
    except TypeError as exc:
        raise ConfigError(f"model params: {exc}") from None


def _model_specs(cfg: dict, ds: Dataset, X) -> list[ModelSpec]:
    specs = []
    for name in cfg["models"]:
        if name in ("deepwalk", "node2vec"):
            emb = _node_embedder(cfg, name).fit(ds.graph).embedding_.astype(np.float64)
            specs.append(ModelSpec(name, make_estimator("logistic", cfg), emb))
        else:
            params = cfg["model"]["params"] if name == cfg["model"]["name"] else {}
            specs.append(ModelSpec(name, make_estimator(name, cfg, params)))
    return specs


def _fit_full(est, X, labels, graph):
    labeled = np.flatnonzero(labels >= 0)
    if getattr(est, "_requires_graph", False):
        return est.fit(X, labels, graph=graph)
    return est.fit(X[labeled], labels[labeled])


def _predict(est, X, graph):
    if getattr(est, "_requires_graph", False):
        return np.asarray(est.predict_proba(X, graph=graph))
    return np.asarray(est.predict_proba(X))


# -------------------------------------------------------------------------
# commands


def cmd_synth(cfg: dict) -> Run:
    run = Run("synth", cfg)
    params = dict(cfg["dataset"].get("synth") or {})
    names = {f.name for f in fields(SynthConfig)}
    bad = sorted(set(params) - names)
    if bad:
        raise ConfigError(f"unknown synth parameter(s): {', '.join(bad)}")
    params.setdefault("seed", child_seed(cfg["seed"], "synth.dataset"))
    scfg = SynthConfig(**params)
    scfg.validate()
    paths = generate(scfg).save(run.out)
    for key, p in paths.items():
        run.outputs[key] = Path(p)
    run.write_manifest()
    return run


def cmd_embed(cfg: dict) -> Run:
    run = Run("embed", cfg)
    ds = load_dataset(cfg["dataset"], cfg["seed"], "dataset")
    run.add_inputs(ds.files)
    X, model = compute_features(cfg, ds)
    write_embedding(run.path("features", "features.hgemb"), ds.users, None,
                    {"features": X}, {"source": cfg["features"]["source"]})
    if isinstance(model, Doc2Vec):
        model.save(run.path("doc2vec", "doc2vec.hgemb"), doc_tags=ds.users)
    elif isinstance(model, (DeepWalk, Node2Vec)):
        model.save(run.path("node_embedding", "node_embedding.hgemb"), node_ids=ds.users)
    run.write_manifest()
    return run


def cmd_train(cfg: dict) -> Run:
    run = Run("train", cfg)
    ds = load_dataset(cfg["dataset"], cfg["seed"], "dataset")
    run.add_inputs(ds.files)
    name = cfg["model"]["name"]
    if name in ("deepwalk", "node2vec"):
        X = _node_embedder(cfg, name).fit(ds.graph).embedding_.astype(np.float64)
        est = make_estimator("logistic", cfg, cfg["model"]["params"])
    else:
        X, _ = compute_features(cfg, ds)
        est = make_estimator(name, cfg, cfg["model"]["params"])
    _fit_full(est, X, ds.labels, ds.graph)
    if isinstance(est, GNNClassifier):
        est.save(run.path("model", "model.hggnn"))
        write_loss_curve(est.loss_curve_, run.path("loss_curve", "loss_curve.csv"))
    else:
        _write_json(run.path("model", "model.json"), {
            "params": est.get_params(), "coef": est.coef_.tolist(),
            "intercept": float(est.intercept_), "mean": est.mean_.tolist(),
            "scale": est.scale_.tolist()})
    proba = _predict(est, X, ds.graph)
    with open(run.path("predictions", "predictions.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user", "label", "prediction", "p_hateful"])
        for u, y, p in zip(ds.users, ds.labels, proba[:, 1]):
            w.writerow([u, int(y), int(p > 0.5), repr(float(p))])
    run.write_manifest()
    return run


def cmd_benchmark(cfg: dict) -> Run:
    run = Run("benchmark", cfg)
    ds = load_dataset(cfg["dataset"], cfg["seed"], "dataset")
    run.add_inputs(ds.files)
    plan = make_fold_plan(ds.labels, cfg["folds"]["k"], cfg["folds"]["fractions"],
                          child_seed(cfg["seed"], "folds"))
    X, _ = compute_features(cfg, ds)
    specs = _model_specs(cfg, ds, X)
    result = run_benchmark(specs, X, ds.labels, plan, graph=ds.graph, seed=cfg["seed"],
                           progress=lambda r: logger.info("%s m=%s fold=%s macro-F1 %.3f",
                                                          r.model, r.m, r.fold, r.macro_f1))
    result.write_csv(run.path("report", "report.csv"))
    result.write_summary(run.path("summary", "summary.json"),
                         {"k": plan.k, "fractions": list(plan.fractions),
                          "n_labeled": plan.n_labeled})
    run.write_manifest()
    return run


def cmd_transfer(cfg: dict) -> Run:
    run = Run("transfer", cfg)
    src = load_dataset(cfg["dataset"], cfg["seed"], "dataset")
    tgt = load_dataset(cfg["target"], cfg["seed"], "target")
    run.add_inputs(src.files, "source.")
    run.add_inputs(tgt.files, "target.")
    if cfg["features"]["source"] == "node-embed":
        raise ConfigError("transfer needs text features; node embeddings do not carry across graphs")
    if cfg["features"]["source"] == "doc2vec":
        d2v = _doc2vec(cfg).fit(src.documents())
        # both sides use inferred vectors so train and test features match
        X_src, X_tgt = d2v.transform(src.documents()), d2v.transform(tgt.documents())
    else:
        X_src, vec = compute_features(cfg, src)
        X_tgt = vec.transform(tgt.documents())
    reports = []
    for name in dict.fromkeys([cfg["model"]["name"], "logistic"]):
        if name in ("deepwalk", "node2vec"):
            raise ConfigError("transfer supports GNN variants and logistic")
        est = make_estimator(name, cfg, cfg["model"]["params"] if name == cfg["model"]["name"] else {})
        _fit_full(est, X_src, src.labels, src.graph)
        reports.append(cross_platform_eval(est, X_tgt, tgt.labels, tgt.graph, name=name,
                                           seed=cfg["seed"]))
    write_report_csv(reports, run.path("report", "transfer_report.csv"))
    _write_json(run.path("summary", "transfer.json"),
                {r.model: {"hateful": {"precision": r.precision[1], "recall": r.recall[1],
                                       "f1": r.f1[1]},
                           "macro_f1": r.macro_f1, "accuracy": r.accuracy}
                 for r in reports})
    run.write_manifest()
    return run


def cmd_posthoc(cfg: dict) -> Run:
    run = Run("posthoc", cfg)
    ds = load_dataset(cfg["dataset"], cfg["seed"], "dataset")
    run.add_inputs(ds.files)
    pc = cfg["posthoc"]
    if ds.edge_times is None:
        raise InputMissing(Path(cfg["dataset"].get("dir") or ".") / "edge_times.tsv", "edge time file")
    if ds.lexicon is None:
        raise InputMissing(Path(cfg["dataset"].get("dir") or ".") / "lexicon.csv", "lexicon file")
    start = pc["start_month"] or ds.start_month
    months = pc["months"] or ds.months
    if start is None or months is None:
        raise ConfigError("posthoc.start_month and posthoc.months are required")
    name = cfg["model"]["name"]
    if name not in VARIANTS + ("logistic",):
        raise ConfigError("posthoc labels snapshots with a GNN variant or logistic")
    if cfg["features"]["source"] != "doc2vec":
        raise ConfigError("posthoc infers snapshot features with doc2vec")
    d2v = _doc2vec(cfg).fit(ds.documents())
    est = make_estimator(name, cfg, cfg["model"]["params"])
    _fit_full(est, d2v.dv_.astype(np.float64), ds.labels, ds.graph)

    series = build_snapshots(ds.corpus, ds.edge_times, start, int(months), pc["min_posts"])
    col = {u: i for i, u in enumerate(ds.users)}
    raw = np.full((len(series), len(ds.users)), -1, dtype=np.int64)
    for t, snap in enumerate(series):
        if not snap.users:
            continue
        docs = build_documents(snap.corpus())
        X = d2v.transform(docs)
        proba = _predict(est, X, snap.graph)
        eligible = set(snap.eligible)
        for i, u in enumerate(snap.users):
            if u in eligible and u in col:
                raw[t, col[u]] = int(proba[i, 1] > 0.5)
    eff = sticky_labels(raw)
    report = target_report(series, eff, ds.lexicon, ds.users, pc["tracked"], pc["min_count"],
                           pc["ratio"])
    for key, p in report.write(run.out).items():
        run.outputs[key] = Path(p)
    with open(run.path("labels", "monthly_labels.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["month", "user", "raw", "effective"])
        for t, snap in enumerate(series):
            for j, u in enumerate(ds.users):
                if raw[t, j] >= 0 or eff[t, j] >= 0:
                    w.writerow([snap.month, u, int(raw[t, j]), int(eff[t, j])])
    run.write_manifest()
    return run


def cmd_seeds(cfg: dict) -> Run:
    run = Run("seeds", cfg)
    ds = load_dataset(cfg["dataset"], cfg["seed"], "dataset")
    run.add_inputs(ds.files)
    sc = cfg["seeds"]
    if ds.reposts is None:
        raise InputMissing(Path(cfg["dataset"].get("dir") or ".") / "reposts.tsv", "repost file")
    if (sc["seed_users"] is None) == (sc["min_hl_posts"] is None):
        raise ConfigError("set exactly one of seeds.seed_users (ids or a file path) "
                          "and seeds.min_hl_posts")
    if sc["min_hl_posts"] is not None:
        if ds.lexicon is None:
            raise InputMissing(Path(cfg["dataset"].get("dir") or ".") / "lexicon.csv",
                               "lexicon file")
        seed_idx = lexicon_seeds(ds.corpus, ds.lexicon, ds.users, int(sc["min_hl_posts"])).tolist()
        if not seed_idx:
            raise ConfigError(f"no user has {sc['min_hl_posts']} or more lexicon posts")
    else:
        seed_users = sc["seed_users"]
        if isinstance(seed_users, str):
            p = Path(seed_users)
            if not p.is_file():
                raise InputMissing(p, "seed user file")
            run.inputs["seed_users"] = p
            seed_users = [ln.strip() for ln in p.read_text("utf-8").splitlines() if ln.strip()]
        index = {u: i for i, u in enumerate(ds.users)}
        unknown = [u for u in seed_users if u not in index]
        if unknown:
            raise ConfigError(f"unknown seed users: {', '.join(unknown[:5])}")
        seed_idx = sorted({index[u] for u in seed_users})
    belief = diffuse(build_belief_network(ds.reposts), seed_idx, sc["iterations"])
    tiers = kmeans_1d(belief.values, 3)
    counts = np.array(ds.corpus.post_counts(ds.users))
    sample = sample_tiers(tiers, sc["per_tier"], sc["min_posts"], counts,
                          child_seed(cfg["seed"], "seeds.sample"))
    write_belief_csv(run.path("beliefs", "beliefs.csv"), belief, tiers, ds.users)
    with open(run.path("sample", "annotation_sample.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user", "tier"])
        for name, nodes in sample.by_tier.items():
            for v in nodes:
                w.writerow([ds.users[v], name])
    run.write_manifest({"num_seeds": len(seed_idx),
                        "shortfall": {k: int(v) for k, v in sample.shortfall.items()}})
    return run


COMMANDS = {
    "synth": cmd_synth, "embed": cmd_embed, "train": cmd_train, "benchmark": cmd_benchmark,
    "transfer": cmd_transfer, "posthoc": cmd_posthoc, "seeds": cmd_seeds,
}


# -------------------------------------------------------------------------
# entry point


def _limit_threads() -> None:
    raw = os.environ.get("HATEGRAPH_THREADS")
    if not raw:
        return
    try:
        n = int(raw)
        if n < 1:
            raise ValueError
    except ValueError:
        raise ConfigError(f"HATEGRAPH_THREADS must be a positive integer, got {raw!r}") from None
    import numba
    from threadpoolctl import threadpool_limits
    threadpool_limits(n)
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hategraph", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"hategraph {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="root seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--model", help=f"one of {', '.join(MODELS)} (comma list for benchmark)")
        p.add_argument("--fractions", help="label percentages, e.g. 5,10,15,20,50,80")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _fail(exc: Exception, code: int, out: str | None) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if getattr(exc, "path", None):
        err["path"] = exc.path
    elif isinstance(exc, FileNotFoundError) and exc.filename:
        err["path"] = str(exc.filename)
    text = json.dumps(err, sort_keys=True)
    print(text, file=sys.stderr)
    if out and Path(out).is_dir():
        Path(out, "error.json").write_text(text + "\n", encoding="utf-8")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = args.out
    try:
        _limit_threads()
        cfg = resolve_config(args)
        out = cfg["out"]
        COMMANDS[args.command](cfg)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        return _fail(exc, EXIT_INVALID, out)
    except Exception as exc:        # unexpected failure: still machine-readable
        logger.debug("unhandled error", exc_info=True)
        return _fail(exc, 1, out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
