"""Post cleaning.

Two profiles share one code path: the classifier profile drops hashtags, the
analytics profile keeps them as plain tokens (``#maga`` -> ``maga``).
"""
from __future__ import annotations

import re
import string
from functools import lru_cache
from importlib import resources

URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
MENTION_RE = re.compile(r"@\w+")
HASHTAG_RE = re.compile(r"#(\w+)")
CONTROL_RE = re.compile("[\x00-\x08\x0b\x0c\x0e-\x1f\x7f-\x9f\u200B-\u200F\u2028-\u202E\uFEFF]")
EMOJI_RE = re.compile(
    "["
    "\U0001F000-\U0001FAFF"   # mahjong .. symbols & pictographs ext-A
    "\u2600-\u27BF"           # misc symbols, dingbats
    "\u2B00-\u2BFF"           # arrows / stars
    "\uFE0E\uFE0F"            # variation selectors
    "\U000E0020-\U000E007F"   # tag characters
    "]+"
)
_EDGE_PUNCT = string.punctuation


@lru_cache(maxsize=1)
def emoticons() -> frozenset[str]:
    text = resources.files(__package__).joinpath("data/emoticons.txt").read_text("utf-8")
    return frozenset(
        line.strip().lower() for line in text.splitlines()
        if line.strip() and not line.startswith("#")
    )


def extract_hashtags(text: str) -> list[str]:
    """Hashtags in order of appearance, lowercased, ``#`` stripped."""
    return [m.lower() for m in HASHTAG_RE.findall(text)]


def _clean_once(text: str, keep_hashtags: bool) -> list[str]:
    text = CONTROL_RE.sub(" ", text.lower())
    text = URL_RE.sub(" ", text)
    text = MENTION_RE.sub(" ", text)
    text = HASHTAG_RE.sub((lambda m: " " + m.group(1) + " ") if keep_hashtags else " ", text)
    text = EMOJI_RE.sub(" ", text)
    table = emoticons()
    out = []
    for tok in text.split():
        if tok in table:
            continue
        tok = tok.strip(_EDGE_PUNCT)
        if tok and tok not in table:
            out.append(tok)
    return out


def preprocess(text: str, keep_hashtags: bool = False) -> list[str]:
    """Lowercased whitespace tokens with URLs, mentions, hashtags and emoticons removed.

    Cleaning repeats until stable, so re-running on the joined output is a no-op.
    """
    tokens = _clean_once(text, keep_hashtags)
    for _ in range(8):
        again = _clean_once(" ".join(tokens), keep_hashtags)
        if again == tokens:
            break
        tokens = again
    return tokens
