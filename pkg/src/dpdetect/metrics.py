"""Confusion matrix, accuracy/precision/recall/F1, ROC curve and AUC."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import MetricsError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class Scores:
    accuracy: float
    precision: float
    recall: float
    f1: float
    # names of the scores whose denominator was zero (reported as 0)
    degenerate: frozenset = frozenset()


@dataclass(frozen=True)
class RocCurve:
    fpr: tuple[float, ...]
    tpr: tuple[float, ...]
    thresholds: tuple[float, ...]

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr, self.tpr))


@dataclass(frozen=True)
class EvaluationReport:
    confusion: ConfusionMatrix
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float
    roc: RocCurve
    per_document: list = field(default_factory=list, compare=False)
    degenerate: frozenset = frozenset()

    def summary(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "auc": self.auc,
        }


def confusion_matrix(y_true, y_pred) -> ConfusionMatrix:
    y_true = np.asarray(y_true).astype(np.int64)
    y_pred = np.asarray(y_pred).astype(np.int64)
    if y_true.shape != y_pred.shape:
        raise MetricsError(f"length mismatch: {y_true.size} true labels vs {y_pred.size} predictions")
    if y_true.size == 0:
        raise MetricsError("confusion matrix needs at least one sample")
    return ConfusionMatrix(
        tp=int(np.sum((y_true == 1) & (y_pred == 1))),
        fp=int(np.sum((y_true == 0) & (y_pred == 1))),
        tn=int(np.sum((y_true == 0) & (y_pred == 0))),
        fn=int(np.sum((y_true == 1) & (y_pred == 0))),
    )


def scores(cm: ConfusionMatrix) -> Scores:
    """Accuracy, precision, recall and F1; zero denominators give 0 and are flagged."""
    if cm.total <= 0:
        raise MetricsError("scores need at least one sample")
    flags = set()

    def ratio(num, den, name):
        if den == 0:
            flags.add(name)
            return 0.0
        return num / den

    accuracy = (cm.tp + cm.tn) / cm.total
    precision = ratio(cm.tp, cm.tp + cm.fp, "precision")
    recall = ratio(cm.tp, cm.tp + cm.fn, "recall")
    f1 = ratio(2 * precision * recall, precision + recall, "f1")
    return Scores(accuracy, precision, recall, f1, frozenset(flags))


def f1_from(precision: float, recall: float) -> float:
    return 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)


def roc_curve(y_true, y_score) -> RocCurve:
    """Sweep a cutoff down through each distinct score; equal scores move together.

    The first point is (0, 0) at threshold +inf.
    """
    y = np.asarray(y_true).astype(np.int64)
    s = np.asarray(y_score, dtype=np.float64)
    if y.shape != s.shape:
        raise MetricsError("labels and scores differ in length")
    P = int(np.sum(y == 1))
    N = int(np.sum(y == 0))
    if P == 0 or N == 0:
        raise MetricsError("ROC needs both classes present")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    # last index of each run of equal scores
    ends = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    tps = np.cumsum(y == 1)[ends]
    fps = np.cumsum(y == 0)[ends]
    fpr = [0.0] + (fps / N).tolist()
    tpr = [0.0] + (tps / P).tolist()
    thr = [float("inf")] + s[ends].tolist()
    if (fpr[-1], tpr[-1]) != (1.0, 1.0):
        fpr.append(1.0)
        tpr.append(1.0)
        thr.append(float("-inf"))
    return RocCurve(tuple(fpr), tuple(tpr), tuple(thr))


def auc(roc: RocCurve) -> float:
    x = np.asarray(roc.fpr)
    y = np.asarray(roc.tpr)
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))


def evaluate(y_true, y_score, threshold: float = 0.5, ids=None) -> EvaluationReport:
    y_true = np.asarray(y_true).astype(np.int64)
    y_score = np.asarray(y_score, dtype=np.float64)
    y_pred = (y_score >= threshold).astype(np.int64)
    cm = confusion_matrix(y_true, y_pred)
    sc = scores(cm)
    roc = roc_curve(y_true, y_score)
    if ids is None:
        ids = [str(i) for i in range(y_true.size)]
    per_doc = list(zip(ids, y_true.tolist(), y_score.tolist(), y_pred.tolist()))
    return EvaluationReport(
        cm, sc.accuracy, sc.precision, sc.recall, sc.f1, auc(roc), roc, per_doc, sc.degenerate
    )


# --- exports -----------------------------------------------------------------


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_roc_csv(roc: RocCurve, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["threshold", "fpr", "tpr"])
        for t, x, y in zip(roc.thresholds, roc.fpr, roc.tpr):
            w.writerow([repr(t), repr(x), repr(y)])


def write_confusion_csv(cm: ConfusionMatrix, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["", "predicted_negative", "predicted_positive"])
        w.writerow(["actual_negative", cm.tn, cm.fp])
        w.writerow(["actual_positive", cm.fn, cm.tp])


def write_metrics_csv(report: EvaluationReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["metric", "value"])
        for k, v in report.summary().items():
            w.writerow([k, repr(v)])
        for k in ("tp", "fp", "tn", "fn"):
            w.writerow([k, getattr(report.confusion, k)])
        w.writerow(["degenerate", ";".join(sorted(report.degenerate))])


def format_summary(report: EvaluationReport) -> str:
    cm = report.confusion
    lines = [f"{k:<10}{v:.4f}" for k, v in report.summary().items()]
    lines.append(f"confusion  TP={cm.tp} FP={cm.fp} TN={cm.tn} FN={cm.fn}")
    if report.degenerate:
        lines.append("degenerate " + ", ".join(sorted(report.degenerate)))
    return "\n".join(lines) + "\n"


def write_predictions_csv(report: EvaluationReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["id", "label", "score", "predicted"])
        for doc_id, label, score, pred in report.per_document:
            w.writerow([doc_id, label, repr(score), pred])
