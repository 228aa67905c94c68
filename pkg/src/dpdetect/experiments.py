"""Cross-validation, grid search, feature importance, error analysis, sensitivity sweeps."""

from __future__ import annotations

import csv
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .corpus import LABEL_NAMES, NEGATIVE, POSITIVE, Corpus, SplitMix64, shuffle
from .errors import ExperimentError
from .metrics import EvaluationReport, evaluate
from .model import TrainConfig, TrainedModel, decision_scores, resolve_learning_rate, train
from .vectorizer import VectorizerConfig, fit_vocabulary, transform

WEIGHTING_ORDER = {"counts": 0, "tfidf": 1}


@dataclass(frozen=True)
class ParamGrid:
    lambdas: tuple = (1.0,)
    ngram_ranges: tuple = ((1, 2),)
    max_features_options: tuple = (None,)
    weightings: tuple = ("tfidf",)

    def __post_init__(self):
        for name in ("lambdas", "ngram_ranges", "max_features_options", "weightings"):
            axis = tuple(getattr(self, name))
            if not axis:
                raise ExperimentError(f"grid axis {name!r} is empty")
            object.__setattr__(self, name, axis)
        object.__setattr__(self, "ngram_ranges", tuple(tuple(r) for r in self.ngram_ranges))

    def __len__(self):
        return len(self.lambdas) * len(self.ngram_ranges) * len(self.max_features_options) * len(self.weightings)

    def cells(self, vconfig: VectorizerConfig, tconfig: TrainConfig):
        for lam, ngram, mf, wt in itertools.product(
            self.lambdas, self.ngram_ranges, self.max_features_options, self.weightings
        ):
            v = replace(vconfig, ngram_min=ngram[0], ngram_max=ngram[1], max_features=mf, weighting=wt)
            yield v, replace(tconfig, lam=float(lam))


@dataclass
class CvResult:
    per_fold: list
    mean_f1: float
    mean_accuracy: float
    std_f1: float
    vectorizer_config: VectorizerConfig
    train_config: TrainConfig
    models: list = field(default_factory=list, repr=False)

    @property
    def mean_auc(self) -> float:
        return float(np.mean([r.auc for r in self.per_fold]))


@dataclass(frozen=True)
class ImportanceEntry:
    term: str
    coefficient: float


@dataclass(frozen=True)
class Misclassification:
    id: str
    text: str
    label: int
    score: float
    predicted: int
    contributions: tuple = ()


@dataclass(frozen=True)
class SensitivityRow:
    axis: str
    value: object
    result: CvResult = field(compare=False)


# --- pipeline helpers ----------------------------------------------------------


def fit_pipeline(train_corpus: Corpus, vconfig: VectorizerConfig, tconfig: TrainConfig) -> TrainedModel:
    """Preprocess, fit the vocabulary on ``train_corpus`` only, then train."""
    cleaned = train_corpus.preprocessed(vconfig.strip_html, vconfig.lowercase)
    vocab = fit_vocabulary(cleaned, vconfig)
    X = transform(cleaned, vocab, vconfig)
    return train(X, resolve_learning_rate(tconfig, vconfig.weighting), vocab, vconfig)


def score_corpus(model: TrainedModel, corpus: Corpus):
    """Return (probabilities, FeatureMatrix) for ``corpus`` under the model's own preprocessing."""
    vc = model.vectorizer_config
    X = transform(corpus.preprocessed(vc.strip_html, vc.lowercase), model.vocab, vc)
    return decision_scores(model, X), X


def evaluate_model(model: TrainedModel, corpus: Corpus) -> EvaluationReport:
    probs, _ = score_corpus(model, corpus)
    return evaluate(corpus.labels, probs, model.train_config.threshold, [d.id for d in corpus])


# --- cross-validation ----------------------------------------------------------


def stratified_folds(labels, k: int, seed: int) -> list[list[int]]:
    """Deal each class's shuffled indices round-robin, continuing across classes.

    Fold sizes and per-class counts then differ by at most one.
    """
    if k < 2:
        raise ExperimentError("k must be >= 2")
    rng = SplitMix64(seed)
    dealt = []
    for cls in (POSITIVE, NEGATIVE):
        members = [i for i, y in enumerate(labels) if y == cls]
        if len(members) < k:
            raise ExperimentError(f"class {LABEL_NAMES[cls]!r} has {len(members)} documents, fewer than k={k}")
        dealt.extend(shuffle(members, rng))
    folds = [[] for _ in range(k)]
    for pos, idx in enumerate(dealt):
        folds[pos % k].append(idx)
    return [sorted(f) for f in folds]


def cv_on_folds(corpus: Corpus, folds, vconfig: VectorizerConfig, tconfig: TrainConfig) -> CvResult:
    reports, models = [], []
    n = len(corpus)
    for held in folds:
        held_set = set(held)
        train_idx = [i for i in range(n) if i not in held_set]
        model = fit_pipeline(corpus.subset(train_idx), vconfig, tconfig)
        models.append(model)
        reports.append(evaluate_model(model, corpus.subset(held)))
    f1s = np.array([r.f1 for r in reports])
    return CvResult(
        per_fold=reports,
        mean_f1=float(np.mean(f1s)),
        mean_accuracy=float(np.mean([r.accuracy for r in reports])),
        std_f1=float(np.std(f1s)),
        vectorizer_config=vconfig,
        train_config=tconfig,
        models=models,
    )


def k_fold_cv(corpus: Corpus, vconfig: VectorizerConfig, tconfig: TrainConfig, k: int = 5, seed: int = 0) -> CvResult:
    """Stratified k-fold CV; vocabulary and idf are refit inside every training fold."""
    return cv_on_folds(corpus, stratified_folds(corpus.labels, k, seed), vconfig, tconfig)


def _run_jobs(corpus, folds, jobs, n_jobs):
    """``jobs`` are ``(description, vconfig, tconfig)``; results keep job order."""

    def run(job):
        desc, v, t = job
        try:
            return cv_on_folds(corpus, folds, v, t)
        except ValueError as exc:
            raise ExperimentError(f"{desc}: {exc}") from exc

    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(run, jobs))
    return [run(j) for j in jobs]


def _selection_key(res: CvResult):
    v, t = res.vectorizer_config, res.train_config
    mf = float("inf") if v.max_features is None else v.max_features
    return (
        -res.mean_f1,
        t.lam,
        mf,
        v.ngram_max - v.ngram_min,
        v.ngram_min,
        WEIGHTING_ORDER[v.weighting],
    )


def select_best(results: list[CvResult]) -> CvResult:
    """Max mean F1; ties go to smaller lambda, fewer features, narrower n-grams, counts."""
    return min(results, key=_selection_key)


def grid_search(
    corpus: Corpus,
    grid: ParamGrid,
    k: int = 5,
    seed: int = 0,
    vconfig: VectorizerConfig = None,
    tconfig: TrainConfig = None,
    n_jobs: int = 1,
):
    """Evaluate every grid cell on one shared fold assignment.

    Returns ``(best, results)`` with results in grid order. Base configs
    supply everything the grid does not vary.
    """
    vconfig = vconfig or VectorizerConfig()
    tconfig = tconfig or TrainConfig()
    folds = stratified_folds(corpus.labels, k, seed)
    jobs = [(f"grid cell {i} ({describe_config(v, t)})", v, t) for i, (v, t) in enumerate(grid.cells(vconfig, tconfig))]
    results = _run_jobs(corpus, folds, jobs, n_jobs)
    return select_best(results), results


def describe_config(v: VectorizerConfig, t: TrainConfig) -> str:
    return f"lambda={t.lam} ngram={v.ngram_min}-{v.ngram_max} max_features={v.max_features} weighting={v.weighting}"


# --- analysis -------------------------------------------------------------------


def feature_importance(model: TrainedModel, top_k: int = 20) -> list[ImportanceEntry]:
    order = sorted(range(model.weights.size), key=lambda i: (-abs(model.weights[i]), model.vocab.terms[i]))
    return [ImportanceEntry(model.vocab.terms[i], float(model.weights[i])) for i in order[: max(top_k, 0)]]


def misclassification_report(model: TrainedModel, test: Corpus, top_terms: int = 5) -> list[Misclassification]:
    """Misclassified documents, most confident mistakes first, with top per-term contributions."""
    probs, X = score_corpus(model, test)
    thr = model.train_config.threshold
    rows = []
    for i, doc in enumerate(test):
        pred = int(probs[i] >= thr)
        if pred == doc.label:
            continue
        vec = X.row(i)
        contrib = [
            (model.vocab.terms[j], float(x * model.weights[j])) for j, x in zip(vec.indices.tolist(), vec.values)
        ]
        contrib.sort(key=lambda tc: (-abs(tc[1]), tc[0]))
        rows.append(Misclassification(doc.id, doc.raw_text, doc.label, float(probs[i]), pred, tuple(contrib[:top_terms])))
    rows.sort(key=lambda r: -abs(r.score - thr))
    return rows


PREPROCESS_OPTIONS = (
    (True, True),
    (False, True),
    (True, False),
    (False, False),
)


def _fmt_value(axis, value):
    if axis == "ngram":
        return f"{value[0]}-{value[1]}"
    if axis == "preprocessing":
        strip, lower = value
        return f"strip_html={'on' if strip else 'off'};lowercase={'on' if lower else 'off'}"
    if value is None:
        return "all"
    return str(value)


def _value_key(value):
    if value is None:
        return (1, 0)
    if isinstance(value, tuple) and value and isinstance(value[0], bool):
        return (0, tuple(not b for b in value))
    return (0, value)


def sensitivity_analysis(
    corpus: Corpus,
    axes: ParamGrid,
    vconfig: VectorizerConfig = None,
    tconfig: TrainConfig = None,
    k: int = 5,
    seed: int = 0,
    preprocessing=PREPROCESS_OPTIONS,
    n_jobs: int = 1,
) -> list[SensitivityRow]:
    """One-at-a-time sweeps around a fixed configuration.

    Each axis of ``axes`` (plus the ``preprocessing`` toggles, pairs of
    ``(strip_html, lowercase)``) is varied alone; rows come back ordered by
    axis name and then value.
    """
    vconfig = vconfig or VectorizerConfig()
    tconfig = tconfig or TrainConfig()
    folds = stratified_folds(corpus.labels, k, seed)
    points = []
    for lam in axes.lambdas:
        points.append(("lambda", lam, vconfig, replace(tconfig, lam=float(lam))))
    for mf in axes.max_features_options:
        points.append(("max_features", mf, replace(vconfig, max_features=mf), tconfig))
    for ng in axes.ngram_ranges:
        points.append(("ngram", ng, replace(vconfig, ngram_min=ng[0], ngram_max=ng[1]), tconfig))
    for wt in axes.weightings:
        points.append(("weighting", wt, replace(vconfig, weighting=wt), tconfig))
    for strip, lower in preprocessing or ():
        points.append(("preprocessing", (strip, lower), replace(vconfig, strip_html=strip, lowercase=lower), tconfig))
    points.sort(key=lambda p: (p[0], _value_key(p[1])))
    jobs = [(f"sensitivity point {a}={_fmt_value(a, val)}", v, t) for a, val, v, t in points]
    results = _run_jobs(corpus, folds, jobs, n_jobs)
    return [SensitivityRow(p[0], p[1], r) for p, r in zip(points, results)]


# --- exports ---------------------------------------------------------------------

RESULT_HEADER = ["axis", "value", "lambda", "ngram", "max_features", "weighting", "mean_accuracy", "mean_f1", "std_f1"]


def _result_row(axis, value, res: CvResult):
    v, t = res.vectorizer_config, res.train_config
    return [
        axis,
        value,
        repr(t.lam),
        f"{v.ngram_min}-{v.ngram_max}",
        "all" if v.max_features is None else v.max_features,
        v.weighting,
        repr(res.mean_accuracy),
        repr(res.mean_f1),
        repr(res.std_f1),
    ]


def write_grid_csv(results: list[CvResult], best: CvResult, path) -> None:
    """One row per cell (axis ``grid``, value = cell index) and a final ``best`` row."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_HEADER)
        for i, res in enumerate(results):
            w.writerow(_result_row("grid", i, res))
        w.writerow(_result_row("best", results.index(best), best))


def write_sensitivity_csv(rows: list[SensitivityRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_HEADER)
        for r in rows:
            w.writerow(_result_row(r.axis, _fmt_value(r.axis, r.value), r.result))


def write_cv_csv(res: CvResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fold", "n", "accuracy", "precision", "recall", "f1", "auc"])
        for i, r in enumerate(res.per_fold):
            w.writerow([i, r.confusion.total] + [repr(x) for x in (r.accuracy, r.precision, r.recall, r.f1, r.auc)])


def write_importance_csv(entries: list[ImportanceEntry], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "term", "coefficient"])
        for i, e in enumerate(entries, start=1):
            w.writerow([i, e.term, repr(e.coefficient)])


def write_misclassification_csv(rows: list[Misclassification], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "text", "label", "score", "predicted", "contributions"])
        for r in rows:
            contrib = ";".join(f"{t}:{c!r}" for t, c in r.contributions)
            w.writerow([r.id, r.text, r.label, repr(r.score), r.predicted, contrib])
