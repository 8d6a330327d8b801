"""Temporal analytics over monthly snapshots.

Snapshots are cumulative: month ``t`` holds every post and follow edge with a
timestamp up to the end of ``t``. Labels predicted per snapshot are made
sticky, users are attributed to target communities through a lexicon, and
hashtags that spike month over month are reported.
"""
from __future__ import annotations

import calendar
import csv
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import cached_property
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .graph import DirectedGraph, from_arrays
from .text.corpus import Post, UserCorpus
from .text.preprocess import preprocess

logger = logging.getLogger(__name__)

TRACKED_COMMUNITIES = ("Jews", "Muslims", "Blacks")


# -------------------------------------------------------------------------
# calendar helpers


def _parse_month(month: str) -> tuple[int, int]:
    try:
        year, mon = (int(x) for x in month.split("-"))
    except ValueError:
        raise ValueError(f"month must look like YYYY-MM, got {month!r}") from None
    if not 1 <= mon <= 12:
        raise ValueError(f"month must look like YYYY-MM, got {month!r}")
    return year, mon


def month_labels(start: str, months: int) -> list[str]:
    year, mon = _parse_month(start)
    out = []
    for _ in range(months):
        out.append(f"{year:04d}-{mon:02d}")
        mon += 1
        if mon > 12:
            year, mon = year + 1, 1
    return out


def month_ends(start: str, months: int) -> list[int]:
    """UTC timestamp of the last second of each month starting at ``YYYY-MM``."""
    ends = []
    for label in month_labels(start, months):
        year, mon = _parse_month(label)
        last = calendar.monthrange(year, mon)[1]
        ends.append(int(datetime(year, mon, last, 23, 59, 59, tzinfo=timezone.utc).timestamp()))
    return ends


def month_start(month: str) -> int:
    year, mon = _parse_month(month)
    return int(datetime(year, mon, 1, tzinfo=timezone.utc).timestamp())


# -------------------------------------------------------------------------
# lexicon


def _singulars(tok: str) -> tuple[str, ...]:
    out = [tok]
    if tok.endswith("s") and len(tok) > 1:
        out.append(tok[:-1])
        if tok.endswith("es") and len(tok) > 2:
            out.append(tok[:-2])
    return tuple(out)


def _token_matches(tok: str, want: str, last: bool) -> bool:
    return tok == want or (last and tok in (want + "s", want + "es"))


def _term_tokens(term: str) -> tuple[str, ...]:
    return tuple(preprocess(term, keep_hashtags=True))


@dataclass(frozen=True)
class Lexicon:
    """Hate terms (single tokens or phrases) tagged with a target community.

    Terms are normalised with the analytics preprocessing profile, so
    matching is case-insensitive and works on whole tokens only.
    """

    entries: Mapping[str, str]

    def __post_init__(self):
        clean: dict[str, str] = {}
        seen: dict[tuple[str, ...], str] = {}
        for term, comm in self.entries.items():
            toks = _term_tokens(str(term))
            if not toks:
                raise ValueError(f"lexicon term {term!r} is empty after normalisation")
            if not str(comm).strip():
                raise ValueError(f"lexicon term {term!r} has no community")
            if toks in seen:
                raise ValueError(f"duplicate lexicon term {term!r} (same as {seen[toks]!r})")
            seen[toks] = term
            clean[" ".join(toks)] = str(comm).strip()
        object.__setattr__(self, "entries", clean)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def communities(self) -> list[str]:
        return sorted(set(self.entries.values()))

    @cached_property
    def _by_first(self) -> dict[str, list[tuple[tuple[str, ...], str]]]:
        index: dict[str, list[tuple[tuple[str, ...], str]]] = {}
        for term in self.entries:
            toks = tuple(term.split(" "))
            index.setdefault(toks[0], []).append((toks, term))
        return index

    def matches(self, tokens: Sequence[str]) -> list[str]:
        """Terms occurring in ``tokens`` as whole tokens or token runs, in order of first hit.

        The last token of a term also matches its plain plural (``+s``, ``+es``).
        """
        found: dict[str, None] = {}
        index = self._by_first
        for i, tok in enumerate(tokens):
            for key in _singulars(tok):
                for toks, term in index.get(key, ()):
                    run = tokens[i:i + len(toks)]
                    if len(run) == len(toks) and all(
                            _token_matches(t, w, j == len(toks) - 1)
                            for j, (t, w) in enumerate(zip(run, toks))):
                        found.setdefault(term)
        return list(found)

    def communities_in(self, tokens: Sequence[str]) -> set[str]:
        return {self.entries[t] for t in self.matches(tokens)}

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["term", "community"])
            for term, comm in self.entries.items():
                w.writerow([term, comm])

    @classmethod
    def from_csv(cls, path) -> "Lexicon":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"term", "community"} <= set(reader.fieldnames):
                raise ValueError(f"{path}: lexicon CSV needs columns term,community")
            entries: dict[str, str] = {}
            for row in reader:
                term = row["term"]
                if term in entries:
                    raise ValueError(f"{path}: duplicate lexicon term {term!r}")
                entries[term] = row["community"]
        return cls(entries)


def post_tokens(post: Post | str) -> list[str]:
    """Analytics profile: hashtags kept as plain tokens."""
    return preprocess(post.text if isinstance(post, Post) else post, keep_hashtags=True)


# -------------------------------------------------------------------------
# snapshots


@dataclass
class Snapshot:
    month: str
    end: int
    users: list[str]
    graph: DirectedGraph
    posts: dict[str, list[Post]]
    eligible: list[str]

    @property
    def num_posts(self) -> int:
        return sum(len(p) for p in self.posts.values())

    def corpus(self, users: Iterable[str] | None = None) -> UserCorpus:
        users = self.users if users is None else users
        return UserCorpus({u: list(self.posts.get(u, ())) for u in users})


@dataclass
class SnapshotSeries:
    months: list[str]
    snapshots: list[Snapshot] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.snapshots)

    def __iter__(self):
        return iter(self.snapshots)

    def __getitem__(self, i) -> Snapshot:
        return self.snapshots[i]


def read_edge_times_tsv(path) -> list[tuple[str, str, int]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected src<TAB>dst<TAB>ts")
            try:
                out.append((parts[0], parts[1], int(parts[2])))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: timestamp {parts[2]!r} is not an integer") from None
    return out


def _month_index(ts: np.ndarray, ends: np.ndarray, first_start: int, what: str) -> np.ndarray:
    idx = np.searchsorted(ends, ts, side="left")
    early = int((ts < first_start).sum())
    if early:
        logger.warning("%d %s before the first month; assigned to it", early, what)
    late = int((idx >= ends.size).sum())
    if late:
        logger.warning("%d %s after the last month; dropped", late, what)
    return idx


def build_snapshots(corpus: UserCorpus, edges: Iterable[tuple], start_month: str, months: int,
                    min_posts: int = 10) -> SnapshotSeries:
    """Cumulative monthly views of the follow graph and the posts.

    ``edges`` holds ``(src, dst, ts)`` triples keyed by user id. A user
    enters the node set with their first post or edge. ``eligible`` lists
    users with at least ``min_posts`` posts over the whole corpus.
    """
    if months < 1:
        raise ValueError("months must be >= 1")
    labels = month_labels(start_month, months)
    ends = np.asarray(month_ends(start_month, months), dtype=np.int64)
    first = month_start(labels[0])

    edges = list(edges)
    e_src = [str(e[0]) for e in edges]
    e_dst = [str(e[1]) for e in edges]
    e_ts = np.asarray([int(e[2]) for e in edges], dtype=np.int64)
    e_month = _month_index(e_ts, ends, first, "edges")

    users = list(corpus.users)
    appear: dict[str, int] = {}
    post_month: dict[str, np.ndarray] = {}
    lifetime = {u: len(corpus[u]) for u in users}
    for u in users:
        ts = np.asarray([p.ts for p in corpus[u]], dtype=np.int64)
        pm = _month_index(ts, ends, first, f"posts of {u}") if ts.size else ts
        post_month[u] = pm
        live = pm[pm < months]
        if live.size:
            appear[u] = int(live.min())
    for s, d, m in zip(e_src, e_dst, e_month):
        if m < months:
            appear[s] = min(appear.get(s, months), int(m))
            appear[d] = min(appear.get(d, months), int(m))

    series = SnapshotSeries(labels)
    for t, label in enumerate(labels):
        present = sorted(u for u, m in appear.items() if m <= t)
        index = {u: i for i, u in enumerate(present)}
        keep = [i for i, m in enumerate(e_month) if m <= t]
        src = np.asarray([index[e_src[i]] for i in keep], dtype=np.int64)
        dst = np.asarray([index[e_dst[i]] for i in keep], dtype=np.int64)
        graph = from_arrays(len(present), src, dst, node_ids=present)
        posts = {}
        for u in present:
            if u in post_month:
                mask = post_month[u] <= t
                posts[u] = [p for p, ok in zip(corpus[u], mask) if ok]
            else:
                posts[u] = []
        eligible = [u for u in present if lifetime.get(u, 0) >= min_posts]
        series.snapshots.append(Snapshot(label, int(ends[t]), present, graph, posts, eligible))
    return series


# -------------------------------------------------------------------------
# labels and targets


def sticky_labels(raw) -> np.ndarray:
    """Per-month effective labels: hateful from the first hateful month onward.

    ``raw`` is ``(months, users)`` with 1 hateful, 0 not, -1 absent.
    """
    raw = np.asarray(raw, dtype=np.int64)
    if raw.ndim != 2:
        raise ValueError("raw labels must be a (months, users) array")
    if raw.size and not np.isin(raw, (-1, 0, 1)).all():
        raise ValueError("raw labels must be -1, 0 or 1")
    ever = np.maximum.accumulate(raw == 1, axis=0)
    return np.where(ever, 1, raw)


def attribute_targets(posts: Mapping[str, Sequence[Post | str]], lexicon: Lexicon) -> dict[str, frozenset]:
    """Communities each user mentions through any lexicon term."""
    out = {}
    for user, user_posts in posts.items():
        comms: set[str] = set()
        for post in user_posts:
            comms |= lexicon.communities_in(post_tokens(post))
        out[user] = frozenset(comms)
    return out


def bucket_names(tracked: Sequence[str] = TRACKED_COMMUNITIES) -> list[str]:
    """Every non-empty subset of ``tracked`` as ``A-B`` in tracked order, then ``none``."""
    names = []
    for r in range(1, len(tracked) + 1):
        names.extend("-".join(c) for c in combinations(tracked, r))
    return names + ["none"]


def joint_target_counts(targets: Mapping[str, Iterable[str]],
                        tracked: Sequence[str] = TRACKED_COMMUNITIES) -> dict[str, int]:
    """Users per exclusive bucket: the exact subset of tracked communities they target.

    A user targeting Jews and Muslims counts once, under ``Jews-Muslims``,
    and not under either singleton. Users with no tracked target go to
    ``none``.
    """
    tracked = list(tracked)
    if len(set(tracked)) != len(tracked):
        raise ValueError("tracked communities must be unique")
    counts = dict.fromkeys(bucket_names(tracked), 0)
    for comms in targets.values():
        hit = [c for c in tracked if c in set(comms)]
        counts["-".join(hit) if hit else "none"] += 1
    return counts


def hashtag_counts(posts: Iterable[Post]) -> Counter:
    return Counter(tag for p in posts for tag in p.hashtags)


def trending_hashtags(freq_t: Mapping[str, int], freq_prev: Mapping[str, int],
                      min_count: int = 10, ratio: float = 0.2) -> list[tuple[str, int]]:
    """Hashtags with ``freq_t >= min_count`` and ``freq_prev <= ratio * freq_t``.

    Sorted by current count (descending), then name.
    """
    if min_count < 0 or ratio < 0:
        raise ValueError("min_count and ratio must be non-negative")
    for name, freq in (("freq_t", freq_t), ("freq_prev", freq_prev)):
        if any(v < 0 for v in freq.values()):
            raise ValueError(f"{name} has negative counts")
    hits = [(h, int(c)) for h, c in freq_t.items()
            if c >= min_count and freq_prev.get(h, 0) <= ratio * c]
    return sorted(hits, key=lambda x: (-x[1], x[0]))


# -------------------------------------------------------------------------
# report


@dataclass
class MonthReport:
    month: str
    hateful_users: int
    community_posts: dict[str, int]
    community_users: dict[str, int]
    joint: dict[str, int]
    trending: list[tuple[str, int]]


@dataclass
class TargetReport:
    months: list[MonthReport]
    tracked: list[str]
    min_count: int
    ratio: float

    def to_dict(self) -> dict:
        return {
            "tracked": list(self.tracked),
            "trending_rule": {"min_count": self.min_count, "ratio": self.ratio},
            "months": [
                {"month": m.month, "hateful_users": m.hateful_users,
                 "community_posts": m.community_posts, "community_users": m.community_users,
                 "joint": m.joint, "trending": [[h, c] for h, c in m.trending]}
                for m in self.months
            ],
        }

    def write(self, out_dir) -> dict[str, str]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "report": out / "target_report.json",
            "communities": out / "community_counts.csv",
            "joint": out / "joint_buckets.csv",
            "hashtags": out / "trending_hashtags.csv",
        }
        with open(paths["report"], "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(paths["communities"], "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["month", "community", "post_count", "user_count"])
            for m in self.months:
                for c in m.community_posts:
                    w.writerow([m.month, c, m.community_posts[c], m.community_users[c]])
        with open(paths["joint"], "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["month", "bucket", "user_count"])
            for m in self.months:
                for b, n in m.joint.items():
                    w.writerow([m.month, b, n])
        with open(paths["hashtags"], "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["month", "hashtag", "count"])
            for m in self.months:
                for h, n in m.trending:
                    w.writerow([m.month, h, n])
        return {k: str(v) for k, v in paths.items()}


def target_report(series: SnapshotSeries, effective: Mapping[str, Sequence[int]] | np.ndarray,
                  lexicon: Lexicon, users: Sequence[str] | None = None,
                  tracked: Sequence[str] = TRACKED_COMMUNITIES, min_count: int = 10,
                  ratio: float = 0.2) -> TargetReport:
    """Assemble per-month community, joint-bucket and trending-hashtag counts.

    ``effective`` is the sticky label matrix ``(months, users)`` aligned with
    ``users``. Community counts use the cumulative posts of users labeled
    hateful that month; hashtag trends use every post made within the month.
    """
    eff = np.asarray(effective, dtype=np.int64)
    if users is None:
        users = series[-1].users if len(series) else []
    users = list(users)
    if eff.shape != (len(series), len(users)):
        raise ValueError(f"labels have shape {eff.shape}, expected {(len(series), len(users))}")
    communities = sorted(set(lexicon.communities) | set(tracked))
    months = []
    prev_tags: Counter = Counter()
    prev_end = None
    for t, snap in enumerate(series):
        hateful = [u for u, y in zip(users, eff[t]) if y == 1 and u in snap.posts]
        posts_c = dict.fromkeys(communities, 0)
        users_c = dict.fromkeys(communities, 0)
        targets = {}
        for u in hateful:
            comms: set[str] = set()
            for p in snap.posts[u]:
                hit = lexicon.communities_in(post_tokens(p))
                for c in hit:
                    posts_c[c] += 1
                comms |= hit
            for c in comms:
                users_c[c] += 1
            targets[u] = comms
        month_posts = [p for ps in snap.posts.values() for p in ps
                       if prev_end is None or p.ts > prev_end]
        tags = hashtag_counts(month_posts)
        months.append(MonthReport(snap.month, len(hateful), posts_c, users_c,
                                  joint_target_counts(targets, tracked),
                                  trending_hashtags(tags, prev_tags, min_count, ratio)))
        prev_tags, prev_end = tags, snap.end
    return TargetReport(months, list(tracked), min_count, ratio)
