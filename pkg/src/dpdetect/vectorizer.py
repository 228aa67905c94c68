"""N-gram bag-of-words features with optional smoothed tf-idf weighting."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, VocabularyError

WEIGHTINGS = ("counts", "tfidf")


@dataclass(frozen=True)
class VectorizerConfig:
    ngram_min: int = 1
    ngram_max: int = 2
    max_features: int | None = None
    min_df: int = 1
    weighting: str = "tfidf"
    # preprocessing toggles travel with the vectorizer so a saved model can
    # clean new text exactly as its training text was cleaned
    strip_html: bool = True
    lowercase: bool = True

    def __post_init__(self):
        if self.ngram_min < 1 or self.ngram_max < self.ngram_min:
            raise VocabularyError(f"bad n-gram range ({self.ngram_min}, {self.ngram_max})")
        if self.max_features is not None and self.max_features < 1:
            raise VocabularyError("max_features must be >= 1")
        if self.min_df < 1:
            raise VocabularyError("min_df must be >= 1")
        if self.weighting not in WEIGHTINGS:
            raise VocabularyError(f"weighting must be one of {WEIGHTINGS}, got {self.weighting!r}")

    @property
    def ngram_range(self) -> tuple[int, int]:
        return (self.ngram_min, self.ngram_max)


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    doc_freq: tuple[int, ...]
    n_docs: int
    idf: tuple[float, ...] | None = None
    index_of: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "doc_freq", tuple(int(d) for d in self.doc_freq))
        if self.idf is not None:
            object.__setattr__(self, "idf", tuple(float(v) for v in self.idf))
        if list(self.terms) != sorted(set(self.terms)):
            raise VocabularyError("vocabulary terms must be unique and sorted")
        if len(self.doc_freq) != len(self.terms):
            raise VocabularyError("doc_freq length differs from term count")
        if self.idf is not None and len(self.idf) != len(self.terms):
            raise VocabularyError("idf length differs from term count")
        object.__setattr__(self, "index_of", {t: i for i, t in enumerate(self.terms)})

    def __len__(self):
        return len(self.terms)

    def __contains__(self, term):
        return term in self.index_of


@dataclass(frozen=True)
class FeatureVector:
    indices: np.ndarray
    values: np.ndarray
    dimension: int
    oov_count: int = 0

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape:
            raise ValueError("indices and values differ in length")
        if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 0 or idx[-1] >= self.dimension):
            raise ValueError("indices must be strictly increasing and below the dimension")
        if np.any(val == 0):
            raise ValueError("zero weights must not be stored")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @property
    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.indices.tolist(), self.values.tolist()))


class FeatureMatrix:
    """Row-ordered sparse documents over one vocabulary, with optional labels."""

    def __init__(self, X: sp.csr_matrix, labels=None, oov_counts=None):
        self.X = sp.csr_matrix(X, dtype=np.float64)
        self.X.sort_indices()
        self.labels = None if labels is None else np.asarray(labels, dtype=np.float64)
        if self.labels is not None and self.labels.shape != (self.X.shape[0],):
            raise DimensionMismatch(f"{self.labels.size} labels for {self.X.shape[0]} rows")
        if oov_counts is None:
            oov_counts = np.zeros(self.X.shape[0], dtype=np.int64)
        self.oov_counts = np.asarray(oov_counts, dtype=np.int64)

    @classmethod
    def from_rows(cls, rows, labels=None, dimension=None):
        rows = list(rows)
        if dimension is None:
            if not rows:
                raise ValueError("dimension required for an empty matrix")
            dimension = rows[0].dimension
        indptr = [0]
        for r in rows:
            if r.dimension != dimension:
                raise DimensionMismatch(f"row of dimension {r.dimension} in a {dimension}-column matrix")
            indptr.append(indptr[-1] + r.indices.size)
        indices = np.concatenate([r.indices for r in rows]) if rows else np.zeros(0, np.int64)
        data = np.concatenate([r.values for r in rows]) if rows else np.zeros(0)
        X = sp.csr_matrix((data, indices, indptr), shape=(len(rows), dimension))
        return cls(X, labels, [r.oov_count for r in rows])

    @property
    def shape(self):
        return self.X.shape

    @property
    def dimension(self) -> int:
        return self.X.shape[1]

    def __len__(self):
        return self.X.shape[0]

    def row(self, i) -> FeatureVector:
        lo, hi = self.X.indptr[i], self.X.indptr[i + 1]
        return FeatureVector(self.X.indices[lo:hi], self.X.data[lo:hi], self.dimension, int(self.oov_counts[i]))

    def __iter__(self):
        return (self.row(i) for i in range(len(self)))

    def take(self, rows) -> "FeatureMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        labels = None if self.labels is None else self.labels[rows]
        return FeatureMatrix(self.X[rows], labels, self.oov_counts[rows])


def tokenize(clean_text: str, config: VectorizerConfig) -> list[str]:
    """Whitespace tokens expanded into n-grams, grouped by n ascending."""
    tokens = clean_text.split()
    out = []
    for n in range(config.ngram_min, config.ngram_max + 1):
        out.extend(" ".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1))
    return out


def smoothed_idf(n_docs: int, df: int) -> float:
    return math.log((1 + n_docs) / (1 + df)) + 1.0


def fit_vocabulary(train, config: VectorizerConfig) -> Vocabulary:
    """Fit terms, document frequencies and (for tf-idf) idf weights.

    ``train`` is a Corpus (its ``clean_text`` is used) or any iterable of
    cleaned strings.
    """
    texts = train.texts if hasattr(train, "texts") else list(train)
    df = Counter()
    for text in texts:
        df.update(set(tokenize(text, config)))
    kept = [(t, c) for t, c in df.items() if c >= config.min_df]
    if config.max_features is not None and len(kept) > config.max_features:
        kept.sort(key=lambda tc: (-tc[1], tc[0]))
        kept = kept[: config.max_features]
    if not kept:
        raise VocabularyError("vocabulary is empty after min_df/max_features pruning")
    kept.sort()
    terms = [t for t, _ in kept]
    freqs = [c for _, c in kept]
    n_docs = len(texts)
    idf = [smoothed_idf(n_docs, c) for c in freqs] if config.weighting == "tfidf" else None
    return Vocabulary(tuple(terms), tuple(freqs), n_docs, None if idf is None else tuple(idf))


def _vector(text: str, vocab: Vocabulary, config: VectorizerConfig):
    counts = Counter()
    oov = 0
    for term in tokenize(text, config):
        j = vocab.index_of.get(term)
        if j is None:
            oov += 1
        else:
            counts[j] += 1
    idx = sorted(counts)
    vals = np.array([counts[j] for j in idx], dtype=np.float64)
    if config.weighting == "tfidf" and idx:
        vals = vals * np.array([vocab.idf[j] for j in idx])
        vals = vals / math.sqrt(math.fsum(vals * vals))
    return np.array(idx, dtype=np.int64), vals, oov


def transform(doc_or_corpus, vocab: Vocabulary, config: VectorizerConfig):
    """Vectorize one cleaned string (-> FeatureVector) or a Corpus / list of strings (-> FeatureMatrix).

    Out-of-vocabulary n-grams are dropped and tallied in ``oov_count(s)``.
    A Corpus input carries its labels into the matrix.
    """
    if config.weighting == "tfidf" and vocab.idf is None:
        raise VocabularyError("tf-idf transform needs a vocabulary fitted with idf weights")
    if isinstance(doc_or_corpus, str):
        idx, vals, oov = _vector(doc_or_corpus, vocab, config)
        return FeatureVector(idx, vals, len(vocab), oov)
    labels = None
    if hasattr(doc_or_corpus, "texts"):
        labels = doc_or_corpus.labels
        texts = doc_or_corpus.texts
    else:
        texts = list(doc_or_corpus)
    indptr, indices, data, oovs = [0], [], [], []
    for text in texts:
        idx, vals, oov = _vector(text, vocab, config)
        indices.append(idx)
        data.append(vals)
        oovs.append(oov)
        indptr.append(indptr[-1] + idx.size)
    X = sp.csr_matrix(
        (
            np.concatenate(data) if data else np.zeros(0),
            np.concatenate(indices) if indices else np.zeros(0, np.int64),
            np.array(indptr),
        ),
        shape=(len(texts), len(vocab)),
    )
    return FeatureMatrix(X, labels, oovs)


def export_vocabulary(vocab: Vocabulary, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["term", "index", "doc_freq", "idf"])
        for i, term in enumerate(vocab.terms):
            idf = "" if vocab.idf is None else repr(vocab.idf[i])
            w.writerow([term, i, vocab.doc_freq[i], idf])
