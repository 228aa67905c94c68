import json
import math

import mpmath
import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from dpdetect.errors import (
    DimensionMismatch,
    DivergenceError,
    IntegrityError,
    ModelFormatError,
    TrainingError,
    VersionError,
)
from dpdetect.experiments import fit_pipeline, score_corpus
from dpdetect.model import (
    TrainConfig,
    TrainedModel,
    load_model,
    loss_and_gradient,
    model_from_json,
    model_to_json,
    predict,
    predict_proba,
    save_model,
    sigmoid,
    train,
)
from dpdetect.vectorizer import FeatureMatrix, FeatureVector, VectorizerConfig, Vocabulary


def _data(X, y):
    return FeatureMatrix(sp.csr_matrix(np.asarray(X, dtype=float)), y)


def test_sigmoid_values():
    assert sigmoid(0.0) == 0.5
    assert abs(sigmoid(1000.0) - 1.0) < 1e-12
    assert abs(sigmoid(-1000.0)) < 1e-12
    mpmath.mp.dps = 40
    exact = 1 / (1 + mpmath.exp(-1))
    assert sigmoid(1.0) == pytest.approx(float(exact), abs=1e-16)
    assert sigmoid(1.0) == 0.7310585786300049


def test_sigmoid_no_overflow_warning():
    with np.errstate(over="raise"):
        sigmoid(np.array([-1e308, 1e308, -745.0, 710.0]))


@settings(max_examples=500)
@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_sigmoid_symmetry(z):
    assert abs(sigmoid(z) + sigmoid(-z) - 1.0) <= 1e-15


def test_loss_at_zero_is_ln2():
    loss, gw, gb = loss_and_gradient(np.zeros(3), 0.0, _data(np.eye(4)[:, :3], [1, 0, 1, 0]), 0.0)
    assert loss == pytest.approx(math.log(2), abs=1e-15)


def test_gradient_single_sample():
    x = np.array([[2.0, -1.0, 0.5]])
    _, gw, gb = loss_and_gradient(np.zeros(3), 0.0, _data(x, [1]), 0.0)
    np.testing.assert_array_equal(gw, -0.5 * x[0])
    assert gb == -0.5


def test_empty_dataset_error():
    with pytest.raises(TrainingError):
        loss_and_gradient(np.zeros(2), 0.0, (sp.csr_matrix((0, 2)), np.zeros(0)), 0.0)


def finite_difference(f, theta, h=1e-6):
    g = np.zeros_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (f(theta + e) - f(theta - e)) / (2 * h)
    return g


def rel_err(a, b):
    return np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))


@pytest.mark.parametrize("lam", [0.0, 0.1, 10.0])
def test_gradient_matches_finite_differences(lam):
    rng = np.random.default_rng(5)
    for _ in range(10):
        m, d = rng.integers(1, 11), rng.integers(1, 9)
        X = rng.normal(size=(m, d))
        y = rng.integers(0, 2, size=m)
        theta = rng.normal(scale=0.3, size=d + 1)
        data = _data(X, y)

        def f(t):
            return loss_and_gradient(t[:-1], t[-1], data, lam)[0]

        _, gw, gb = loss_and_gradient(theta[:-1], theta[-1], data, lam)
        assert np.all(rel_err(np.r_[gw, gb], finite_difference(f, theta)) < 1e-6)


def test_train_separable_points():
    data = _data([[1.0, 0.0], [0.0, 1.0]], [1, 0])
    m = train(data, TrainConfig(lam=0.0, learning_rate=0.5, max_iters=2000))
    preds = [predict(m, r) for r in data]
    assert preds == [1, 0]


def test_heavy_penalty_flattens_weights():
    rng = np.random.default_rng(1)
    X = rng.random((30, 6))
    y = rng.integers(0, 2, 30)
    y[:2] = [0, 1]
    data = _data(X, y)
    m = train(data, TrainConfig(lam=1e6, learning_rate=1e-5, max_iters=3000))
    assert np.linalg.norm(m.weights) < 1e-3
    for r in data:
        assert abs(predict_proba(m, r) - sigmoid(m.bias)) < 1e-3


def reference_descent(X, y, lam, lr, iters):
    """Plain dense loop, written independently of the library code."""
    m, d = X.shape
    w = np.zeros(d)
    b = 0.0
    losses = []
    for _ in range(iters + 1):
        z = X @ w + b
        h = np.array([1 / (1 + math.exp(-v)) for v in z])
        hc = np.clip(h, 1e-12, 1 - 1e-12)
        losses.append(-np.mean(y * np.log(hc) + (1 - y) * np.log(1 - hc)) + lam / (2 * m) * (w @ w))
        gw = X.T @ (h - y) / m + lam / m * w
        gb = np.mean(h - y)
        w, b = w - lr * gw, b - lr * gb
    return losses


def test_descent_matches_reference_loop():
    rng = np.random.default_rng(2)
    X = rng.random((20, 7))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    y = np.array([0, 1] * 10, dtype=float)
    m = train(_data(X, y), TrainConfig(lam=1.0, learning_rate=0.01, max_iters=300, tol=1e-300))
    ref = reference_descent(X, y, 1.0, 0.01, 300)
    np.testing.assert_allclose(m.training_log, ref, rtol=1e-12, atol=1e-14)
    assert all(b <= a + 1e-12 for a, b in zip(m.training_log, m.training_log[1:]))


def test_stops_on_tolerance():
    data = _data([[1.0, 0.0], [0.0, 1.0]], [1, 0])
    m = train(data, TrainConfig(lam=1.0, learning_rate=0.5, max_iters=100000, tol=1e-6))
    assert m.n_iters < 100000
    assert abs(m.training_log[-1] - m.training_log[-2]) < 1e-6


def test_order_invariance():
    rng = np.random.default_rng(8)
    X = rng.random((40, 10))
    X[X < 0.6] = 0
    y = rng.integers(0, 2, 40)
    y[:2] = [0, 1]
    cfg = TrainConfig(lam=0.5, learning_rate=0.1, max_iters=500)
    a = train(_data(X, y), cfg)
    perm = rng.permutation(40)
    b = train(_data(X[perm], y[perm]), cfg)
    np.testing.assert_allclose(a.weights, b.weights, rtol=0, atol=1e-12)
    assert abs(a.bias - b.bias) <= 1e-12


def test_divergence_detected():
    X = np.array([[1e150, 0.0], [0.0, 1e150]])
    with pytest.raises(DivergenceError) as info:
        train(_data(X, [1, 0]), TrainConfig(lam=1.0, learning_rate=1e10, max_iters=50))
    assert info.value.iteration >= 1


def test_single_class_rejected():
    with pytest.raises(TrainingError):
        train(_data(np.eye(2), [1, 1]), TrainConfig(learning_rate=0.1))


def test_unresolved_learning_rate_rejected():
    with pytest.raises(TrainingError):
        train(_data(np.eye(2), [1, 0]), TrainConfig())


def _toy_model(weights, bias=0.0, threshold=0.5):
    terms = tuple("abcdefghij"[: len(weights)])
    vocab = Vocabulary(terms, (1,) * len(terms), 2)
    return TrainedModel(np.array(weights, float), bias, vocab, VectorizerConfig(weighting="counts"),
                        TrainConfig(threshold=threshold))


def test_predict_proba_examples():
    zero = _toy_model([0.0, 0.0])
    assert predict_proba(zero, FeatureVector([0], [3.0], 2)) == 0.5
    m = _toy_model([1.0, -1.0])
    assert predict_proba(m, FeatureVector([0, 1], [2.0, 1.0], 2)) == pytest.approx(0.7310585786, abs=1e-10)
    biased = _toy_model([1.0, 1.0], bias=-0.3)
    assert predict_proba(biased, FeatureVector([], [], 2)) == sigmoid(-0.3)
    with pytest.raises(DimensionMismatch):
        predict_proba(m, FeatureVector([0], [1.0], 3))


def test_predict_threshold_rule():
    m = _toy_model([1.0])
    assert predict(m, FeatureVector([0], [math.log(0.73 / 0.27)], 1)) == 1
    assert predict(m, FeatureVector([], [], 1)) == 1  # exactly 0.5 at threshold 0.5
    assert predict(m, FeatureVector([0], [math.log(0.49 / 0.51)], 1)) == 0


@settings(max_examples=200)
@given(st.floats(-30, 30), st.floats(0.01, 0.99))
def test_decision_boundary(z, thr):
    m = _toy_model([1.0], threshold=thr)
    x = FeatureVector([0], [z], 1) if z != 0 else FeatureVector([], [], 1)
    assert predict(m, x) == int(predict_proba(m, x) >= thr)


@pytest.fixture(scope="module")
def fitted(synthetic):
    from dpdetect.corpus import SplitSpec, split

    train_part, test_part = split(synthetic, SplitSpec(0.8, 0))
    return fit_pipeline(train_part, VectorizerConfig(), TrainConfig(max_iters=300)), test_part


def test_roundtrip_bit_exact(fitted, tmp_path):
    model, test_part = fitted
    path = tmp_path / "m.json"
    save_model(model, path)
    loaded = load_model(path)
    a, X = score_corpus(model, test_part)
    b, _ = score_corpus(loaded, test_part)
    assert np.array_equal(a, b)
    for row in X:
        assert predict_proba(model, row) == predict_proba(loaded, row)
    assert loaded.vectorizer_config == model.vectorizer_config
    assert loaded.train_config == model.train_config
    assert np.array_equal(loaded.weights, model.weights) and loaded.bias == model.bias
    assert model_to_json(loaded) == model_to_json(model)


def test_model_file_schema(fitted):
    model, _ = fitted
    doc = json.loads(model_to_json(model))
    assert doc["format_version"] == 1
    assert {"vectorizer_config", "train_config", "vocabulary", "weights", "bias", "checksum"} <= doc.keys()
    term, df, idf = doc["vocabulary"][0]
    assert isinstance(term, str) and isinstance(df, int) and isinstance(idf, float)


def test_version_error(fitted):
    doc = json.loads(model_to_json(fitted[0]))
    doc["format_version"] = 2
    with pytest.raises(VersionError):
        model_from_json(json.dumps(doc))


def test_length_integrity_error(fitted):
    doc = json.loads(model_to_json(fitted[0]))
    doc["weights"].append(0.0)
    with pytest.raises(IntegrityError, match="weights"):
        model_from_json(json.dumps(doc))


def test_checksum_error(fitted):
    doc = json.loads(model_to_json(fitted[0]))
    doc["bias"] += 1.0
    with pytest.raises(IntegrityError, match="checksum"):
        model_from_json(json.dumps(doc))


def test_truncated_file(fitted):
    text = model_to_json(fitted[0])
    with pytest.raises(ModelFormatError):
        model_from_json(text[: len(text) // 2])


def test_training_log_finite(fitted):
    assert all(math.isfinite(v) for v in fitted[0].training_log)
