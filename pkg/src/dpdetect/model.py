"""L2-regularized binary logistic regression trained by full-batch gradient descent."""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import (
    DimensionMismatch,
    DivergenceError,
    IntegrityError,
    ModelFormatError,
    TrainingError,
    VersionError,
)
from .vectorizer import FeatureMatrix, FeatureVector, Vocabulary, VectorizerConfig

FORMAT_VERSION = 1
EPS = 1e-12

DEFAULT_LEARNING_RATE = {"tfidf": 0.1, "counts": 0.01}


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 1.0
    # None means "the default for the feature weighting", see resolve_learning_rate
    learning_rate: float | None = None
    max_iters: int = 5000
    tol: float = 1e-7
    threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not self.lam >= 0:
            raise TrainingError(f"lambda must be >= 0, got {self.lam}")
        if self.learning_rate is not None and not self.learning_rate > 0:
            raise TrainingError(f"learning rate must be > 0, got {self.learning_rate}")
        if self.max_iters < 1:
            raise TrainingError("max_iters must be >= 1")
        if not self.tol > 0:
            raise TrainingError("tol must be > 0")
        if not 0 < self.threshold < 1:
            raise TrainingError("threshold must be in (0, 1)")


def resolve_learning_rate(config: TrainConfig, weighting: str) -> TrainConfig:
    if config.learning_rate is not None:
        return config
    return TrainConfig(**{**asdict(config), "learning_rate": DEFAULT_LEARNING_RATE[weighting]})


@dataclass(frozen=True)
class TrainedModel:
    weights: np.ndarray
    bias: float
    vocab: Vocabulary
    vectorizer_config: VectorizerConfig
    train_config: TrainConfig
    training_log: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (len(self.vocab),):
            raise IntegrityError(f"{w.size} weights for a vocabulary of {len(self.vocab)} terms")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))
        object.__setattr__(self, "training_log", tuple(float(v) for v in self.training_log))

    @property
    def n_iters(self) -> int:
        return max(len(self.training_log) - 1, 0)

    @property
    def final_loss(self) -> float:
        return self.training_log[-1] if self.training_log else float("nan")


def sigmoid(z):
    """Numerically stable logistic function; accepts scalars or arrays."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return float(out) if out.ndim == 0 else out


def _design(data):
    if isinstance(data, FeatureMatrix):
        return data.X, data.labels
    X, y = data
    return sp.csr_matrix(X, dtype=np.float64), np.asarray(y, dtype=np.float64)


def loss_and_gradient(weights, bias, data, lam):
    """Mean cross-entropy with an (lam / 2m)||w||^2 penalty, bias unpenalized.

    ``data`` is a labelled FeatureMatrix or an ``(X, y)`` pair. Returns
    ``(loss, grad_w, grad_b)``.
    """
    X, y = _design(data)
    m = X.shape[0]
    if m == 0:
        raise TrainingError("loss undefined on an empty dataset")
    if y is None:
        raise TrainingError("labels required")
    w = np.asarray(weights, dtype=np.float64)
    h = sigmoid(X @ w + bias)
    hc = np.clip(h, EPS, 1.0 - EPS)
    loss = -np.sum(y * np.log(hc) + (1.0 - y) * np.log(1.0 - hc)) / m + lam / (2 * m) * np.dot(w, w)
    r = h - y
    grad_w = (X.T @ r) / m + (lam / m) * w
    grad_b = np.sum(r) / m
    return float(loss), grad_w, float(grad_b)


def train(data: FeatureMatrix, config: TrainConfig, vocab: Vocabulary = None, vectorizer_config=None) -> TrainedModel:
    """Gradient descent from zero until the loss change drops below ``tol``.

    ``training_log[0]`` is the loss at the zero start; each further entry
    follows one update. ``vocab``/``vectorizer_config`` are attached to the
    returned model (a bare index vocabulary is synthesised when omitted).
    """
    if config.learning_rate is None:
        raise TrainingError("learning rate unresolved; call resolve_learning_rate first")
    X, y = _design(data)
    if y is None or X.shape[0] == 0:
        raise TrainingError("training needs labelled samples")
    if not np.all(np.isfinite(X.data)):
        raise TrainingError("non-finite feature values")
    classes = set(np.unique(y).tolist())
    if classes != {0.0, 1.0}:
        raise TrainingError(f"training data must contain both classes, got {sorted(classes)}")
    d = X.shape[1]
    w = np.zeros(d)
    b = 0.0
    lr = config.learning_rate
    loss, gw, gb = loss_and_gradient(w, b, (X, y), config.lam)
    log = [loss]
    for it in range(1, config.max_iters + 1):
        w = w - lr * gw
        b = b - lr * gb
        new_loss, gw, gb = loss_and_gradient(w, b, (X, y), config.lam)
        if not math.isfinite(new_loss) or not np.all(np.isfinite(w)):
            raise DivergenceError(it, new_loss)
        log.append(new_loss)
        if abs(new_loss - loss) < config.tol:
            break
        loss = new_loss
    if vocab is None:
        vocab = Vocabulary(tuple(f"f{i:08d}" for i in range(d)), (1,) * d, X.shape[0])
    if vectorizer_config is None:
        vectorizer_config = VectorizerConfig(weighting="counts")
    return TrainedModel(w, b, vocab, vectorizer_config, config, tuple(log))


def decision_scores(model: TrainedModel, data) -> np.ndarray:
    """Probabilities for every row of a FeatureMatrix (or sparse matrix)."""
    X = data.X if isinstance(data, FeatureMatrix) else sp.csr_matrix(data)
    if X.shape[1] != model.weights.size:
        raise DimensionMismatch(f"matrix has {X.shape[1]} columns, model expects {model.weights.size}")
    return np.atleast_1d(sigmoid(X @ model.weights + model.bias))


def predict_proba(model: TrainedModel, x: FeatureVector) -> float:
    if x.dimension != model.weights.size:
        raise DimensionMismatch(f"vector dimension {x.dimension} != model dimension {model.weights.size}")
    return float(sigmoid(np.dot(x.values, model.weights[x.indices]) + model.bias))


def predict(model: TrainedModel, x: FeatureVector) -> int:
    return int(predict_proba(model, x) >= model.train_config.threshold)


def predict_labels(model: TrainedModel, scores) -> np.ndarray:
    return (np.asarray(scores) >= model.train_config.threshold).astype(np.int64)


# --- persistence -------------------------------------------------------------


def _num(x) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ModelFormatError(f"cannot serialize non-finite value {x}")
    return format(x, ".17g")


def _dumps(obj) -> str:
    """Canonical JSON: sorted keys, no whitespace, floats at 17 significant digits."""
    if obj is None or isinstance(obj, (bool, str)):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{_dumps(v)}" for k, v in sorted(obj.items())) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(_dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _vocab_rows(vocab: Vocabulary):
    return [
        [t, df, None if vocab.idf is None else float(vocab.idf[i])]
        for i, (t, df) in enumerate(zip(vocab.terms, vocab.doc_freq))
    ]


def _checksum(vocab_rows, weights, bias) -> str:
    payload = _dumps([vocab_rows, [float(w) for w in weights], float(bias)])
    return format(zlib.crc32(payload.encode("utf-8")), "08x")


def model_to_json(model: TrainedModel) -> str:
    rows = _vocab_rows(model.vocab)
    weights = [float(w) for w in model.weights]
    doc = {
        "format_version": FORMAT_VERSION,
        "vectorizer_config": asdict(model.vectorizer_config),
        "train_config": asdict(model.train_config),
        "n_docs": model.vocab.n_docs,
        "vocabulary": rows,
        "weights": weights,
        "bias": model.bias,
        "training_log": list(model.training_log),
        "checksum": _checksum(rows, weights, model.bias),
    }
    return _dumps(doc) + "\n"


def save_model(model: TrainedModel, path) -> None:
    Path(path).write_text(model_to_json(model), encoding="utf-8")


def model_from_json(text: str) -> TrainedModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is truncated or not JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelFormatError("model file must hold a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported model format_version {version!r} (expected {FORMAT_VERSION})")
    try:
        rows = doc["vocabulary"]
        weights = doc["weights"]
        bias = doc["bias"]
        if len(weights) != len(rows):
            raise IntegrityError(f"{len(weights)} weights for a vocabulary of {len(rows)} terms")
        if _checksum(rows, weights, bias) != doc["checksum"]:
            raise IntegrityError("checksum mismatch: vocabulary, weights or bias were altered")
        idf = [r[2] for r in rows]
        vocab = Vocabulary(
            tuple(r[0] for r in rows),
            tuple(r[1] for r in rows),
            doc["n_docs"],
            None if all(v is None for v in idf) else tuple(idf),
        )
        return TrainedModel(
            np.array(weights, dtype=np.float64),
            float(bias),
            vocab,
            VectorizerConfig(**doc["vectorizer_config"]),
            TrainConfig(**doc["train_config"]),
            tuple(doc.get("training_log", ())),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ModelFormatError(f"model file is missing or has malformed fields: {exc!r}") from None


def load_model(path) -> TrainedModel:
    return model_from_json(Path(path).read_text(encoding="utf-8"))
