"""Accuracy/F1 metrics, KNN and Gaussian naive Bayes baselines, comparison tables.

The positive class for precision, recall and F1 is label 1 (healthy).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from ._io import atomic_write
from .data import Dataset
from .errors import BadParameter, EmptyDataset, EmptyInput, LengthMismatch, SchemaMismatch, SingleClass

POSITIVE_CLASS = 1


class ConfusionCounts(NamedTuple):
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class Metrics:
    counts: ConfusionCounts
    accuracy: float
    precision: float
    recall: float
    f1: float
    undefined: bool  # some ratio had a zero denominator and was reported as 0


def confusion(predictions, labels) -> ConfusionCounts:
    p = np.asarray(predictions, dtype=np.int64)
    y = np.asarray(labels, dtype=np.int64)
    if p.shape != y.shape or p.ndim != 1:
        raise LengthMismatch(f"predictions {p.shape} and labels {y.shape} differ")
    if p.size == 0:
        raise EmptyInput("no predictions to score")
    for arr, what in ((p, "predictions"), (y, "labels")):
        if not np.isin(arr, (0, 1)).all():
            raise BadParameter(f"{what} must be 0/1")
    pos = POSITIVE_CLASS
    return ConfusionCounts(
        tp=int(np.sum((p == pos) & (y == pos))),
        fp=int(np.sum((p == pos) & (y != pos))),
        tn=int(np.sum((p != pos) & (y != pos))),
        fn=int(np.sum((p != pos) & (y == pos))),
    )


def _ratio(num: int, den: int):
    return (num / den, False) if den else (0.0, True)


def metrics_from_counts(c: ConfusionCounts) -> Metrics:
    accuracy = (c.tp + c.tn) / c.total
    precision, u1 = _ratio(c.tp, c.tp + c.fp)
    recall, u2 = _ratio(c.tp, c.tp + c.fn)
    if precision + recall > 0:
        f1, u3 = 2 * precision * recall / (precision + recall), False
    else:
        f1, u3 = 0.0, True
    return Metrics(c, accuracy, precision, recall, f1, u1 or u2 or u3)


def metrics(predictions, labels) -> Metrics:
    return metrics_from_counts(confusion(predictions, labels))


class MinMaxScaler:
    """Per-feature min-max scaling fitted on training rows; constant columns map to 0."""

    def __init__(self, X: np.ndarray):
        self.lo = X.min(axis=0)
        span = X.max(axis=0) - self.lo
        self.span = np.where(span > 0, span, 1.0)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.lo) / self.span


class KNNClassifier:
    """k-nearest-neighbours vote with Euclidean distance on min-max scaled features.

    Distance ties go to the lower training index; vote ties go to label 1.
    """

    def __init__(self, train: Dataset, k: int = 5):
        if not train.labeled:
            raise BadParameter("KNN needs a labeled training set")
        if not isinstance(k, (int, np.integer)) or not 1 <= k <= len(train):
            raise BadParameter(f"k must lie in [1, {len(train)}], got {k!r}")
        self.k = int(k)
        self.scaler = MinMaxScaler(train.X)
        self.Xs = self.scaler.transform(train.X)
        self.y = train.y
        self.schema = train.schema

    def predict(self, X: np.ndarray, chunk: int = 64) -> np.ndarray:
        Q = self.scaler.transform(np.atleast_2d(np.asarray(X, dtype=np.float64)))
        if Q.shape[1] != self.Xs.shape[1]:
            raise SchemaMismatch("query width does not match training data")
        out = np.empty(Q.shape[0], dtype=np.int64)
        for start in range(0, Q.shape[0], chunk):
            q = Q[start:start + chunk]
            d2 = ((q[:, None, :] - self.Xs[None, :, :]) ** 2).sum(axis=2)
            nearest = np.argsort(d2, axis=1, kind="stable")[:, : self.k]
            ones = self.y[nearest].sum(axis=1)
            out[start:start + chunk] = (2 * ones >= self.k).astype(np.int64)
        return out


def knn_predict(train: Dataset, query, k: int) -> int:
    return int(KNNClassifier(train, k).predict(np.asarray(query, dtype=np.float64)[None, :])[0])


VARIANCE_FLOOR = 1e-9


@dataclass(frozen=True, eq=False)
class NaiveBayesModel:
    """Per-class Gaussian parameters and log priors, classes ordered (0, 1)."""

    means: np.ndarray
    variances: np.ndarray
    log_priors: np.ndarray

    def log_posteriors(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.means.shape[1]:
            raise SchemaMismatch("query width does not match model")
        diff = X[:, None, :] - self.means[None, :, :]
        ll = -0.5 * (np.log(2 * np.pi * self.variances)[None] + diff * diff / self.variances[None])
        return ll.sum(axis=2) + self.log_priors[None, :]

    def predict(self, X: np.ndarray) -> np.ndarray:
        lp = self.log_posteriors(X)
        return (lp[:, 1] >= lp[:, 0]).astype(np.int64)


def naive_bayes_fit(train: Dataset) -> NaiveBayesModel:
    if not train.labeled:
        raise BadParameter("naive Bayes needs a labeled training set")
    means, variances, priors = [], [], []
    for c in (0, 1):
        Xc = train.X[train.y == c]
        if Xc.shape[0] == 0:
            raise SingleClass(f"class {c} absent from training data")
        means.append(Xc.mean(axis=0))
        variances.append(np.maximum(Xc.var(axis=0), VARIANCE_FLOOR))
        priors.append(math.log(Xc.shape[0] / len(train)))
    return NaiveBayesModel(np.array(means), np.array(variances), np.array(priors))


def naive_bayes_predict(nb: NaiveBayesModel, sample) -> int:
    return int(nb.predict(np.asarray(sample, dtype=np.float64)[None, :])[0])


class ComparisonRow(NamedTuple):
    model_name: str
    accuracy: float  # percent
    f1: float  # percent


Predictor = Callable[[Dataset], Sequence[int]]


def compare(models: Sequence[tuple], test: Dataset) -> list:
    """Score named predictors on a labeled test set, one row per model in input order.

    Each entry of ``models`` is ``(name, predictor)`` where the predictor maps
    a Dataset to a 0/1 label per sample, or ``(name, labels)`` with the
    predictions already computed.
    """
    if len(test) == 0 or not test.labeled:
        raise EmptyDataset("comparison needs a non-empty labeled test set")
    rows = []
    for name, pred in models:
        labels = pred(test) if callable(pred) else pred
        m = metrics(np.asarray(labels), test.y)
        rows.append(ComparisonRow(name, 100.0 * m.accuracy, 100.0 * m.f1))
    return rows


def _pct(v: float) -> str:
    return f"{v:.2f}"


def comparison_csv(rows: Sequence[ComparisonRow], path) -> None:
    with atomic_write(path, newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "acc", "f1"])
        for r in rows:
            w.writerow([r.model_name, _pct(r.accuracy), _pct(r.f1)])


def comparison_text(rows: Sequence[ComparisonRow]) -> str:
    """Aligned plain-text table with columns Model | Acc | F1-score."""
    table = [("Model", "Acc", "F1-score")] + [(r.model_name, _pct(r.accuracy), _pct(r.f1)) for r in rows]
    widths = [max(len(t[c]) for t in table) for c in range(3)]
    lines = []
    for i, (name, acc, f1) in enumerate(table):
        lines.append(f"{name:<{widths[0]}} | {acc:>{widths[1]}} | {f1:>{widths[2]}}")
        if i == 0:
            lines.append("-+-".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def read_predictions_csv(path, n: int) -> np.ndarray:
    """Read externally produced labels from a CSV with a ``prediction`` column."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "prediction" not in reader.fieldnames:
            raise BadParameter(f"{path}: needs a 'prediction' column")
        labels = [int(float(r["prediction"])) for r in reader]
    if len(labels) != n:
        raise LengthMismatch(f"{path}: {len(labels)} predictions for {n} test samples")
    return np.array(labels, dtype=np.int64)
