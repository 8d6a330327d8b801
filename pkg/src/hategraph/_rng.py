"""Seed plumbing: one root seed, independent named substreams."""
from __future__ import annotations

import zlib

import numpy as np


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def substream(seed: int | None, name: str) -> np.random.Generator:
    """Generator for component ``name`` derived from the root ``seed``.

    Adding a new component name never changes the draws of existing ones.
    """
    root = 0 if seed is None else int(seed)
    return np.random.default_rng(np.random.SeedSequence([root, _name_key(name)]))


def child_seed(seed: int | None, name: str) -> int:
    """Integer seed (63 bit) for libraries that want a plain int."""
    return int(substream(seed, name).integers(0, 2**63 - 1))
