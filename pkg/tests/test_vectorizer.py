import csv

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpdetect.errors import DimensionMismatch, VocabularyError
from dpdetect.vectorizer import (
    FeatureMatrix,
    FeatureVector,
    VectorizerConfig,
    export_vocabulary,
    fit_vocabulary,
    tokenize,
    transform,
)

COUNTS = VectorizerConfig(ngram_min=1, ngram_max=1, weighting="counts")
TFIDF = VectorizerConfig(ngram_min=1, ngram_max=1, weighting="tfidf")


def test_tokenize_examples():
    assert tokenize("only 3 left", COUNTS) == ["only", "3", "left"]
    assert tokenize("sign up now", VectorizerConfig(1, 2)) == ["sign", "up", "now", "sign up", "up now"]
    assert tokenize("", VectorizerConfig(1, 3)) == []
    assert tokenize("a b", VectorizerConfig(3, 3)) == []


def test_fit_examples():
    v = fit_vocabulary(["a b", "b c"], COUNTS)
    assert v.terms == ("a", "b", "c") and v.doc_freq == (1, 2, 1) and v.idf is None
    v = fit_vocabulary(["a b", "b c"], VectorizerConfig(1, 1, max_features=2, weighting="counts"))
    assert v.terms == ("a", "b")
    v = fit_vocabulary(["a b", "b c"], VectorizerConfig(1, 1, min_df=2, weighting="counts"))
    assert v.terms == ("b",)
    v = fit_vocabulary(["a b", "b c"], TFIDF)
    assert v.idf[1] == 1.0


def test_doc_freq_counts_documents_not_occurrences():
    v = fit_vocabulary(["a a a", "a"], COUNTS)
    assert v.doc_freq == (2,)


def test_empty_vocabulary_error():
    with pytest.raises(VocabularyError):
        fit_vocabulary(["a", "b"], VectorizerConfig(1, 1, min_df=2))
    with pytest.raises(VocabularyError):
        fit_vocabulary(["", ""], COUNTS)


def test_config_validation():
    with pytest.raises(VocabularyError):
        VectorizerConfig(2, 1)
    with pytest.raises(VocabularyError):
        VectorizerConfig(max_features=0)
    with pytest.raises(VocabularyError):
        VectorizerConfig(weighting="binary")


def test_transform_counts():
    v = fit_vocabulary(["a", "b", "c"], COUNTS)
    x = transform("b b c", v, COUNTS)
    assert x.entries == [(1, 2.0), (2, 1.0)]
    z = transform("z z", v, COUNTS)
    assert z.entries == [] and z.oov_count == 2


def test_transform_tfidf_matches_hand_oracle():
    mpmath.mp.dps = 50
    v = fit_vocabulary(["a b", "b b"], TFIDF)
    idf_a = mpmath.log(mpmath.mpf(3) / 2) + 1
    idf_b = mpmath.log(mpmath.mpf(3) / 3) + 1
    norm = mpmath.sqrt(idf_a**2 + idf_b**2)
    assert v.idf[0] == pytest.approx(float(idf_a), abs=1e-15)
    assert float(idf_a) == pytest.approx(1.405465, abs=1e-6)
    x = transform("a b", v, TFIDF)
    assert x.indices.tolist() == [0, 1]
    np.testing.assert_allclose(x.values, [float(idf_a / norm), float(idf_b / norm)], rtol=0, atol=1e-15)
    np.testing.assert_allclose(x.values, [0.814802, 0.579739], atol=1e-6)


def test_transform_matrix_carries_labels(synthetic):
    c = synthetic.preprocessed()
    cfg = VectorizerConfig()
    v = fit_vocabulary(c, cfg)
    X = transform(c, v, cfg)
    assert X.shape == (len(c), len(v))
    assert X.labels.tolist() == c.labels
    assert X.row(3).dimension == len(v)


def test_transform_does_not_mutate_vocab():
    v = fit_vocabulary(["a b"], TFIDF)
    before = (v.terms, v.doc_freq, v.idf)
    transform(["c d e", "a a"], v, TFIDF)
    assert (v.terms, v.doc_freq, v.idf) == before


def test_dimension_mismatch_in_matrix():
    a = FeatureVector([0], [1.0], 3)
    b = FeatureVector([0], [1.0], 4)
    with pytest.raises(DimensionMismatch):
        FeatureMatrix.from_rows([a, b])


def test_feature_vector_invariants():
    with pytest.raises(ValueError):
        FeatureVector([1, 0], [1.0, 1.0], 3)
    with pytest.raises(ValueError):
        FeatureVector([0], [0.0], 3)
    with pytest.raises(ValueError):
        FeatureVector([3], [1.0], 3)


def test_export_vocabulary(tmp_path):
    v = fit_vocabulary(["a b", "b b"], TFIDF)
    path = tmp_path / "vocab.csv"
    export_vocabulary(v, path)
    rows = list(csv.DictReader(path.open()))
    assert [r["term"] for r in rows] == ["a", "b"]
    assert [int(r["index"]) for r in rows] == [0, 1]
    assert float(rows[0]["idf"]) == v.idf[0]
    export_vocabulary(fit_vocabulary(["a"], COUNTS), path)
    assert list(csv.DictReader(path.open()))[0]["idf"] == ""


words = st.sampled_from(["a", "b", "c", "d", "e", "f", "g"])
docs = st.lists(st.lists(words, max_size=8).map(" ".join), min_size=1, max_size=12)


@settings(max_examples=80, deadline=None)
@given(docs, st.integers(1, 2), st.integers(1, 2), st.randoms(use_true_random=False))
def test_vocabulary_properties(texts, nmax, min_df, rnd):
    cfg = VectorizerConfig(1, nmax, min_df=min_df, weighting="tfidf")
    try:
        v = fit_vocabulary(texts, cfg)
    except VocabularyError:
        return
    assert list(v.terms) == sorted(v.terms)
    assert all(min_df <= d <= v.n_docs for d in v.doc_freq)
    assert all(i >= 1 for i in v.idf)
    shuffled = list(texts)
    rnd.shuffle(shuffled)
    assert fit_vocabulary(shuffled, cfg) == v
    X = transform(texts, v, cfg)
    norms = np.sqrt(np.asarray(X.X.multiply(X.X).sum(axis=1)).ravel())
    for row, norm in zip(X, norms):
        if row.indices.size:
            assert abs(norm - 1.0) <= 1e-12
    # count weights sum to the number of in-vocabulary n-grams
    cc = VectorizerConfig(1, nmax, min_df=min_df, weighting="counts")
    vc = fit_vocabulary(texts, cc)
    for t in texts:
        x = transform(t, vc, cc)
        grams = tokenize(t, cc)
        assert x.values.sum() == sum(g in vc for g in grams)
        assert x.oov_count == sum(g not in vc for g in grams)


@settings(max_examples=80, deadline=None)
@given(docs, st.integers(1, 10))
def test_max_features_selects_top_k(texts, k):
    full_cfg = VectorizerConfig(1, 2, weighting="counts")
    try:
        full = fit_vocabulary(texts, full_cfg)
    except VocabularyError:
        return
    ranked = sorted(zip(full.terms, full.doc_freq), key=lambda td: (-td[1], td[0]))
    v = fit_vocabulary(texts, VectorizerConfig(1, 2, max_features=k, weighting="counts"))
    assert set(v.terms) == {t for t, _ in ranked[:k]}


@settings(max_examples=50, deadline=None)
@given(docs)
def test_raising_min_df_never_adds_terms(texts):
    prev = None
    for m in (1, 2, 3):
        try:
            terms = set(fit_vocabulary(texts, VectorizerConfig(1, 2, min_df=m)).terms)
        except VocabularyError:
            terms = set()
        if prev is not None:
            assert terms <= prev
        prev = terms
