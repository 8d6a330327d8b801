"""PV-DBOW paragraph vectors as a scikit-learn transformer."""
from __future__ import annotations

import logging
import zlib
from collections import Counter

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .. import sgns
from .._rng import child_seed, substream
from ..containers import read_embedding, write_embedding
from .corpus import UserDocument

logger = logging.getLogger(__name__)


def _as_tokens(doc) -> list[str]:
    if isinstance(doc, UserDocument):
        return list(doc.tokens)
    if isinstance(doc, str):
        return doc.split()
    return list(doc)


class Doc2Vec(TransformerMixin, BaseEstimator):
    """Distributed bag-of-words paragraph vectors trained with negative sampling.

    ``fit`` learns one vector per training document (``dv_``) together with
    the output word matrix. ``transform`` infers fresh vectors for any
    documents against the frozen output matrix; out-of-vocabulary tokens are
    skipped and documents with no known token map to the zero vector.

    Parameters
    ----------
    vector_size : int
        Embedding dimension.
    negative : int
        Negative samples per positive word.
    epochs, infer_epochs : int
        Passes over the corpus during training and per inferred document.
    min_count : int
        Tokens seen fewer times are dropped from the vocabulary.
    alpha, min_alpha : float
        Learning rate, decayed linearly to ``min_alpha``.
    """

    def __init__(self, vector_size=100, negative=5, epochs=10, min_count=2,
                 alpha=0.025, min_alpha=0.0001, infer_epochs=50, ns_exponent=0.75,
                 random_state=0):
        self.vector_size = vector_size
        self.negative = negative
        self.epochs = epochs
        self.min_count = min_count
        self.alpha = alpha
        self.min_alpha = min_alpha
        self.infer_epochs = infer_epochs
        self.ns_exponent = ns_exponent
        self.random_state = random_state

    # -- vocabulary ---------------------------------------------------------

    def _encode(self, tokens) -> np.ndarray:
        index = self.vocab_index_
        return np.array([index[t] for t in tokens if t in index], dtype=np.int64)

    def fit(self, X, y=None):
        docs = [_as_tokens(d) for d in X]
        if len(docs) < 2:
            raise ValueError("Doc2Vec needs at least 2 documents")
        counts = Counter(t for d in docs for t in d)
        kept = sorted((t for t, c in counts.items() if c >= self.min_count),
                      key=lambda t: (-counts[t], t))
        if not kept:
            raise ValueError("empty vocabulary after min_count filtering")
        self.vocabulary_ = kept
        self.vocab_index_ = {t: i for i, t in enumerate(kept)}
        self.counts_ = np.array([counts[t] for t in kept], dtype=np.int64)
        self.cum_table_ = sgns.make_cum_table(self.counts_, self.ns_exponent)

        dim = self.vector_size
        rng = substream(self.random_state, "doc2vec.init")
        self.dv_ = (rng.random((len(docs), dim)) - 0.5) / dim
        self.syn1neg_ = np.zeros((len(kept), dim))

        encoded = [self._encode(d) for d in docs]
        tokens = np.concatenate(encoded) if encoded else np.zeros(0, dtype=np.int64)
        offsets = np.zeros(len(docs) + 1, dtype=np.int64)
        np.cumsum([e.size for e in encoded], out=offsets[1:])
        losses, pairs = sgns.train_dbow(
            self.dv_, self.syn1neg_, tokens, offsets, self.cum_table_,
            int(self.negative), int(self.epochs), float(self.alpha), float(self.min_alpha),
            child_seed(self.random_state, "doc2vec.train"), np.arange(len(docs)),
        )
        per_epoch = max(tokens.size, 1)
        self.loss_history_ = losses / per_epoch
        self.n_pairs_ = int(pairs)
        self.empty_documents_ = [i for i, e in enumerate(encoded) if e.size == 0]
        return self

    # -- inference ----------------------------------------------------------

    def _doc_seed(self, tokens) -> int:
        h = zlib.crc32("\x1f".join(tokens).encode("utf-8"))
        return child_seed(self.random_state, f"doc2vec.infer.{h}")

    def infer_vector(self, doc) -> np.ndarray:
        check_is_fitted(self, "syn1neg_")
        tokens = _as_tokens(doc)
        ids = self._encode(tokens)
        dim = self.vector_size
        if ids.size == 0:
            logger.warning("document has no in-vocabulary tokens; returning zero vector")
            return np.zeros(dim)
        seed = self._doc_seed(tokens)
        vec = (np.random.default_rng(seed).random(dim) - 0.5) / dim
        return sgns.infer_dbow(
            vec, self.syn1neg_, ids, self.cum_table_, int(self.negative),
            int(self.infer_epochs), float(self.alpha), float(self.min_alpha), seed,
        )

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "syn1neg_")
        docs = list(X)
        out = np.zeros((len(docs), self.vector_size))
        for i, d in enumerate(docs):
            out[i] = self.infer_vector(d)
        return out

    def fit_transform(self, X, y=None, **fit_params):
        """Fit and return the trained (not re-inferred) document vectors."""
        return self.fit(X, y).dv_.copy()

    # -- persistence --------------------------------------------------------

    def save(self, path, doc_tags=None) -> None:
        check_is_fitted(self, "syn1neg_")
        meta = {"kind": "doc2vec-dbow", "params": self.get_params(),
                "doc_tags": list(doc_tags) if doc_tags is not None else None}
        write_embedding(path, self.vocabulary_, self.counts_,
                        {"docvecs": self.dv_, "syn1neg": self.syn1neg_}, meta)

    @classmethod
    def load(cls, path) -> "Doc2Vec":
        vocab, counts, mats, meta = read_embedding(path)
        if meta.get("kind") != "doc2vec-dbow":
            raise ValueError(f"{path}: not a doc2vec container")
        model = cls(**meta["params"])
        model.vocabulary_ = vocab
        model.vocab_index_ = {t: i for i, t in enumerate(vocab)}
        model.counts_ = counts
        model.cum_table_ = sgns.make_cum_table(counts, model.ns_exponent)
        model.dv_ = mats["docvecs"]
        model.syn1neg_ = mats["syn1neg"]
        model.doc_tags_ = meta.get("doc_tags")
        return model
