"""Synthetic social networks with a planted hateful community.

A two-block directed stochastic block model (hateful / non-hateful) with
optional reciprocation, a repost network laid over the follow edges, and a
post corpus whose background words follow a Zipf law over a neutral
vocabulary. Posts of each class contain a lexicon term with a configured
per-post probability (the HL rate).
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._rng import substream
from .graph import DirectedGraph, from_arrays, write_edge_tsv
from .posthoc import Lexicon, month_ends
from .text.corpus import Post, UserCorpus, write_posts_jsonl

DEFAULT_COMMUNITIES = ("Jews", "Muslims", "Blacks", "Women", "Immigrants")


def default_lexicon(terms_per_community: int = 9, communities=DEFAULT_COMMUNITIES) -> dict[str, str]:
    """Placeholder lexicon ``term -> community`` (45 terms by default)."""
    return {f"hl{c.lower()[:3]}{i:02d}": c for c in communities for i in range(terms_per_community)}


@dataclass
class SynthConfig:
    n_nodes: int = 2000
    hateful_fraction: float = 0.3
    p_in: float = 0.02
    p_in_hateful: float | None = None
    p_out: float = 0.002
    reciprocity: float = 0.2
    hl_rate_hateful: float = 0.05
    hl_rate_normal: float = 0.02
    min_posts: int = 10
    mean_extra_posts: float = 10.0
    words_per_post: int = 12
    vocab_size: int = 3000
    zipf_exponent: float = 1.05
    topic_vocab: int = 200
    topic_rate: float = 0.025
    hashtag_vocab: int = 60
    hashtag_rate: float = 0.15
    repost_prob: float = 0.5
    repost_mean: float = 2.0
    months: int = 6
    start_month: str = "2016-10"
    growth: float = 1.3
    lexicon: dict = field(default_factory=default_lexicon)
    seed: int = 0

    def validate(self) -> None:
        for name in ("hateful_fraction", "p_in", "p_in_hateful", "p_out", "reciprocity", "hl_rate_hateful",
                     "hl_rate_normal", "topic_rate", "hashtag_rate", "repost_prob"):
            v = getattr(self, name)
            if v is None and name == "p_in_hateful":
                continue
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.n_nodes < 2:
            raise ValueError("n_nodes must be >= 2")
        if self.min_posts < 1 or self.words_per_post < 1 or self.months < 1:
            raise ValueError("min_posts, words_per_post and months must be >= 1")
        n_hate = int(round(self.hateful_fraction * self.n_nodes))
        if self.hl_rate_hateful > 0 and n_hate == 0:
            raise ValueError("hateful HL rate requested but no hateful users")
        if (self.hl_rate_hateful > 0 or self.hl_rate_normal > 0) and not self.lexicon:
            raise ValueError("HL rates > 0 need a non-empty lexicon")


@dataclass
class SynthDataset:
    config: SynthConfig
    users: list[str]
    labels: np.ndarray
    follows: DirectedGraph
    follow_times: np.ndarray          # aligned with follows' CSR edge order
    reposts: DirectedGraph
    corpus: UserCorpus
    lexicon: dict[str, str]
    month_ends: list[int]
    hl_posts: np.ndarray              # per-user count of posts with a lexicon term

    def post_counts(self) -> np.ndarray:
        return np.array(self.corpus.post_counts(self.users))

    def save(self, out_dir) -> dict[str, str]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "edges": out / "edges.tsv",
            "edge_times": out / "edge_times.tsv",
            "reposts": out / "reposts.tsv",
            "posts": out / "posts.jsonl",
            "labels": out / "labels.csv",
            "lexicon": out / "lexicon.csv",
            "config": out / "config.json",
        }
        write_edge_tsv(self.follows, paths["edges"], weights=False)
        write_edge_tsv(self.reposts, paths["reposts"], weights=True)
        with open(paths["edge_times"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write("# src\tdst\tts\n")
            for (u, v, _), ts in zip(self.follows.edges(), self.follow_times):
                fh.write(f"{self.users[u]}\t{self.users[v]}\t{int(ts)}\n")
        write_posts_jsonl(self.corpus, paths["posts"])
        write_labels_csv(paths["labels"], self.users, self.labels)
        write_lexicon_csv(paths["lexicon"], self.lexicon)
        with open(paths["config"], "w", encoding="utf-8") as fh:
            json.dump(asdict(self.config), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return {k: str(v) for k, v in paths.items()}


def write_labels_csv(path, users, labels) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user", "label"])
        for u, y in zip(users, labels):
            w.writerow([u, int(y)])


def read_labels_csv(path) -> dict[str, int]:
    with open(path, encoding="utf-8", newline="") as fh:
        return {row["user"]: int(row["label"]) for row in csv.DictReader(fh)}


def write_lexicon_csv(path, lexicon: dict[str, str]) -> None:
    Lexicon(lexicon).to_csv(path)


def _sbm_block(rng, rows, cols, p, same):
    """Directed edges between two node sets, each pair independently with prob ``p``."""
    nr, nc = rows.size, cols.size
    total = nr * nc
    pairs = total - (nr if same else 0)
    k = rng.binomial(pairs, p) if p > 0 else 0
    if k == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    if same:
        # oversample then drop self pairs; keeps the draw a uniform subset
        flat = rng.choice(total, size=min(total, k + k // 10 + 10), replace=False)
        r, c = flat // nc, flat % nc
        ok = rows[r] != cols[c]
        r, c = r[ok][:k], c[ok][:k]
    else:
        flat = rng.choice(total, size=k, replace=False)
        r, c = flat // nc, flat % nc
    return rows[r], cols[c]


def _zipf_probs(n, s):
    p = 1.0 / np.arange(1, n + 1) ** s
    return p / p.sum()


def generate(cfg: SynthConfig) -> SynthDataset:
    cfg.validate()
    n = cfg.n_nodes
    rng_graph = substream(cfg.seed, "synth.graph")
    rng_text = substream(cfg.seed, "synth.text")
    rng_time = substream(cfg.seed, "synth.time")

    n_hate = int(round(cfg.hateful_fraction * n))
    labels = np.zeros(n, dtype=np.int64)
    labels[substream(cfg.seed, "synth.labels").permutation(n)[:n_hate]] = 1
    hate, normal = np.flatnonzero(labels == 1), np.flatnonzero(labels == 0)

    # -- follow graph
    # reciprocate with q so that the share of edges whose reverse exists is
    # 2q / (1 + q) = reciprocity; base draws are thinned by 1 + q so that the
    # final block densities match the configured probabilities
    q = cfg.reciprocity / (2.0 - cfg.reciprocity)
    parts = []
    for a, b in ((hate, hate), (normal, normal), (hate, normal), (normal, hate)):
        same = a is b
        p = cfg.p_out
        if same:
            p = cfg.p_in_hateful if a is hate and cfg.p_in_hateful is not None else cfg.p_in
        parts.append(_sbm_block(rng_graph, a, b, p / (1.0 + q), same))
    src = np.concatenate([p[0] for p in parts])
    dst = np.concatenate([p[1] for p in parts])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    recip = rng_graph.random(src.size) < q
    src, dst = np.concatenate([src, dst[recip]]), np.concatenate([dst, src[recip]])
    users = [f"u{i:05d}" for i in range(n)]
    follows = from_arrays(n, src, dst, node_ids=users)
    if follows.num_edges:
        follows = DirectedGraph(n, follows.indptr, follows.indices,
                                np.ones(follows.num_edges), follows.node_ids, False)

    # -- timeline: join months grow geometrically
    ends = month_ends(cfg.start_month, cfg.months)
    starts = [ends[0] - 30 * 86400 + 1] + [e + 1 for e in ends[:-1]]
    wmonth = cfg.growth ** np.arange(cfg.months)
    join = rng_time.choice(cfg.months, size=n, p=wmonth / wmonth.sum())
    esrc = follows.sources()
    emonth = np.maximum(join[esrc], join[follows.indices])
    etimes = rng_time.integers(np.asarray(starts)[emonth], np.asarray(ends)[emonth] + 1).astype(np.int64)

    # -- repost network over follow edges (u reposts v when u follows v)
    rp = rng_graph.random(follows.num_edges) < cfg.repost_prob
    rw = 1 + rng_graph.poisson(cfg.repost_mean, size=int(rp.sum()))
    reposts = from_arrays(n, esrc[rp], follows.indices[rp], rw.astype(np.float64), node_ids=users)

    # -- corpus
    lex_terms = list(cfg.lexicon)
    communities = sorted(set(cfg.lexicon.values()))
    by_comm = {c: [t for t in lex_terms if cfg.lexicon[t] == c] for c in communities}
    vocab = [f"w{i:04d}" for i in range(cfg.vocab_size)]
    pz = _zipf_probs(cfg.vocab_size, cfg.zipf_exponent)
    # one shared topical vocabulary; the classes rank it in opposite orders
    topic_words = [f"t{i:03d}" for i in range(cfg.topic_vocab)]
    topics = [topic_words, topic_words[::-1]]
    ptopic = _zipf_probs(max(cfg.topic_vocab, 1), cfg.zipf_exponent)
    tags = [f"tag{i:03d}" for i in range(cfg.hashtag_vocab)]
    ptag = _zipf_probs(max(cfg.hashtag_vocab, 1), cfg.zipf_exponent)

    posts: dict[str, list[Post]] = {}
    hl_posts = np.zeros(n, dtype=np.int64)
    for i in range(n):
        y = labels[i]
        k_posts = cfg.min_posts + rng_text.poisson(cfg.mean_extra_posts)
        rate = cfg.hl_rate_hateful if y == 1 else cfg.hl_rate_normal
        if communities:
            n_targets = rng_text.integers(1, min(3, len(communities)) + 1)
            targets = list(rng_text.choice(communities, size=n_targets, replace=False))
        ts = np.sort(rng_text.integers(starts[join[i]], ends[-1] + 1, size=k_posts))
        word_ids = rng_text.choice(cfg.vocab_size, size=(k_posts, cfg.words_per_post), p=pz)
        if cfg.topic_rate > 0:
            swap = rng_text.random(word_ids.shape) < cfg.topic_rate
            topic_ids = rng_text.choice(cfg.topic_vocab, size=word_ids.shape, p=ptopic)
        has_hl = rng_text.random(k_posts) < rate
        has_tag = rng_text.random(k_posts) < cfg.hashtag_rate
        user_posts = []
        for r, t in enumerate(ts):
            words = [vocab[j] for j in word_ids[r]]
            if cfg.topic_rate > 0:
                for j in np.flatnonzero(swap[r]):
                    words[j] = topics[y][topic_ids[r, j]]
            if lex_terms and has_hl[r]:
                comm = targets[rng_text.integers(len(targets))]
                words[rng_text.integers(len(words))] = rng_text.choice(by_comm[comm])
                hl_posts[i] += 1
            if cfg.hashtag_vocab and has_tag[r]:
                words.append("#" + tags[rng_text.choice(cfg.hashtag_vocab, p=ptag)])
            user_posts.append(Post.from_text(int(t), " ".join(words)))
        posts[users[i]] = user_posts
    corpus = UserCorpus(posts)
    return SynthDataset(cfg, users, labels, follows, etimes, reposts, corpus,
                        dict(cfg.lexicon), ends, hl_posts)
