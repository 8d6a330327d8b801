"""Text side: preprocessing, user documents, doc2vec, word vectors, logistic head."""
from .corpus import Post, UserCorpus, UserDocument, build_documents, read_posts_jsonl, write_posts_jsonl
from .doc2vec import Doc2Vec
from .logistic import LogisticRegression
from .preprocess import extract_hashtags, preprocess
from .wordvec import MeanEmbeddingVectorizer, WordVectors, load_word_embeddings, mean_pool

__all__ = [
    "Doc2Vec",
    "LogisticRegression",
    "MeanEmbeddingVectorizer",
    "Post",
    "UserCorpus",
    "UserDocument",
    "WordVectors",
    "build_documents",
    "extract_hashtags",
    "load_word_embeddings",
    "mean_pool",
    "preprocess",
    "read_posts_jsonl",
    "write_posts_jsonl",
]
