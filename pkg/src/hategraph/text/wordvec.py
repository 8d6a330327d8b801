"""Pretrained word vectors in the plain ``word v1 ... vd`` text format."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .doc2vec import _as_tokens


@dataclass(frozen=True)
class WordVectors:
    index: dict[str, int]
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __contains__(self, word) -> bool:
        return word in self.index

    def __getitem__(self, word) -> np.ndarray:
        return self.matrix[self.index[word]]


def load_word_embeddings(path, skip_header: bool | None = None) -> WordVectors:
    """Read a text embedding file.

    A leading ``"<count> <dim>"`` line (word2vec style) is skipped when
    detected. Later duplicates of a word are ignored.
    """
    words, rows, dim = [], [], None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").rstrip().split(" ")
            if not parts or parts == [""]:
                continue
            if lineno == 1 and skip_header is not False and len(parts) == 2 and all(
                    p.isdigit() for p in parts):
                continue
            vec = parts[1:]
            if dim is None:
                dim = len(vec)
                if dim == 0:
                    raise ValueError(f"{path}:{lineno}: no vector components")
            elif len(vec) != dim:
                raise ValueError(f"{path}:{lineno}: expected {dim} components, got {len(vec)}")
            words.append(parts[0])
            rows.append([float(v) for v in vec])
    index: dict[str, int] = {}
    keep = []
    for i, w in enumerate(words):
        if w not in index:
            index[w] = len(keep)
            keep.append(i)
    matrix = np.array([rows[i] for i in keep], dtype=np.float64).reshape(len(keep), dim or 0)
    return WordVectors(index, matrix)


def save_word_embeddings(wv: WordVectors, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for w, i in wv.index.items():
            fh.write(w + " " + " ".join(repr(float(v)) for v in wv.matrix[i]) + "\n")


def mean_pool(document, wv: WordVectors) -> np.ndarray:
    """Mean of the vectors of known tokens; zero vector when none is known."""
    ids = [wv.index[t] for t in _as_tokens(document) if t in wv.index]
    if not ids:
        return np.zeros(wv.dim)
    return wv.matrix[np.sort(np.array(ids))].mean(axis=0)


class MeanEmbeddingVectorizer(TransformerMixin, BaseEstimator):
    """Documents -> mean of pretrained word vectors (stateless transformer)."""

    def __init__(self, path=None, vectors: WordVectors | None = None):
        self.path = path
        self.vectors = vectors

    def fit(self, X=None, y=None):
        self.vectors_ = self.vectors if self.vectors is not None else load_word_embeddings(self.path)
        return self

    def transform(self, X):
        return np.vstack([mean_pool(d, self.vectors_) for d in X]) if len(X) else np.zeros(
            (0, self.vectors_.dim))
