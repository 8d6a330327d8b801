"""Per-user post collections and the documents built from them."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .preprocess import extract_hashtags, preprocess

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Post:
    ts: int
    text: str
    hashtags: tuple[str, ...] = ()

    @classmethod
    def from_text(cls, ts: int, text: str) -> "Post":
        return cls(int(ts), text, tuple(extract_hashtags(text)))


@dataclass
class UserCorpus:
    """Posts per user, each list kept in timestamp order (stable for ties)."""

    posts: dict[str, list[Post]] = field(default_factory=dict)

    def __post_init__(self):
        for user in list(self.posts):
            self.posts[user] = sorted(self.posts[user], key=lambda p: p.ts)

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> "UserCorpus":
        posts: dict[str, list[Post]] = {}
        for rec in records:
            user, ts, text = _validate_record(rec)
            posts.setdefault(user, []).append(Post.from_text(ts, text))
        return cls(posts)

    @property
    def users(self) -> list[str]:
        return list(self.posts)

    def __len__(self) -> int:
        return len(self.posts)

    def __iter__(self) -> Iterator[str]:
        return iter(self.posts)

    def __getitem__(self, user: str) -> list[Post]:
        return self.posts[user]

    def post_counts(self, users: Iterable[str] | None = None) -> list[int]:
        users = self.users if users is None else users
        return [len(self.posts.get(u, ())) for u in users]

    def records(self) -> Iterator[dict]:
        for user, posts in self.posts.items():
            for p in posts:
                yield {"user": user, "ts": p.ts, "text": p.text}

    def subset(self, users: Iterable[str]) -> "UserCorpus":
        return UserCorpus({u: list(self.posts.get(u, [])) for u in users})


def _validate_record(rec: dict) -> tuple[str, int, str]:
    try:
        user, ts, text = rec["user"], rec["ts"], rec["text"]
    except (KeyError, TypeError):
        raise ValueError(f"post record needs user, ts, text: {rec!r}") from None
    if not isinstance(user, str) or not isinstance(text, str):
        raise ValueError(f"user and text must be strings: {rec!r}")
    if isinstance(ts, bool) or not isinstance(ts, int):
        raise ValueError(f"ts must be an integer (UTC seconds): {rec!r}")
    return user, ts, text


def read_posts_jsonl(path) -> UserCorpus:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return UserCorpus.from_records(records)


def write_posts_jsonl(corpus: UserCorpus, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in corpus.records():
            fh.write(json.dumps(rec, ensure_ascii=False, separators=(",", ":")) + "\n")


@dataclass(frozen=True)
class UserDocument:
    user: str
    tokens: tuple[str, ...]

    @property
    def empty(self) -> bool:
        return not self.tokens


def build_documents(corpus: UserCorpus, keep_hashtags: bool = False) -> list[UserDocument]:
    """One document per user: cleaned posts concatenated in timestamp order."""
    docs = []
    for user, posts in corpus.posts.items():
        tokens: list[str] = []
        for p in sorted(posts, key=lambda p: p.ts):
            tokens.extend(preprocess(p.text, keep_hashtags=keep_hashtags))
        doc = UserDocument(user, tuple(tokens))
        if doc.empty:
            logger.warning("user %s has no tokens after preprocessing", user)
        docs.append(doc)
    return docs
