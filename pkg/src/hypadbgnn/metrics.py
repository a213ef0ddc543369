"""Classification metrics on integer label arrays."""

from __future__ import annotations

import numpy as np


def _classes(labels: np.ndarray, classes) -> np.ndarray:
    if classes is None:
        return np.unique(labels)
    classes = np.asarray(classes)
    empty = [int(c) for c in classes if not np.any(labels == c)]
    if empty:
        raise ValueError(f"classes {empty} have no true members")
    return classes


def confusion(labels, predictions, num_classes: int | None = None) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    if num_classes is None:
        num_classes = int(max(labels.max(initial=0), predictions.max(initial=0))) + 1
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (labels, predictions), 1)
    return cm


def balanced_accuracy(labels, predictions, classes=None) -> float:
    """Unweighted mean of per-class recall over the classes present in ``labels``."""
    labels = np.asarray(labels)
    predictions = np.asarray(predictions)
    if labels.shape != predictions.shape:
        raise ValueError("labels and predictions differ in length")
    if labels.size == 0:
        raise ValueError("no labels")
    cls = _classes(labels, classes)
    recalls = [np.mean(predictions[labels == c] == c) for c in cls]
    return float(np.mean(recalls))


def macro_metrics(labels, predictions, classes=None) -> tuple[float, float, float]:
    """``(macro F1, macro precision, macro recall)`` over the classes in ``labels``.

    A class that is never predicted gets precision 0; F1 is 0 when precision
    and recall are both 0.
    """
    labels = np.asarray(labels)
    predictions = np.asarray(predictions)
    if labels.shape != predictions.shape:
        raise ValueError("labels and predictions differ in length")
    cls = _classes(labels, classes)
    f1s, precs, recs = [], [], []
    for c in cls:
        tp = np.sum((predictions == c) & (labels == c))
        pred_pos = np.sum(predictions == c)
        true_pos = np.sum(labels == c)
        p = tp / pred_pos if pred_pos else 0.0
        r = tp / true_pos if true_pos else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        precs.append(p)
        recs.append(r)
        f1s.append(f)
    return float(np.mean(f1s)), float(np.mean(precs)), float(np.mean(recs))
