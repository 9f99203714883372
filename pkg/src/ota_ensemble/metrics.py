"""Macro-F1 for 1-based class labels."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ParameterError


def macro_f1(predictions: Sequence[int], labels: Sequence[int]) -> float:
    """Unweighted mean of per-class F1 = 2PR/(P+R).

    The class set is every index appearing in the labels or the predictions,
    so a class with zero support and zero predictions is excluded from the
    average; a class present on only one side contributes F1 = 0. A
    prediction of 0 means "no decision": it never matches any class and is
    not a class itself, so it only costs recall on its true label.
    """
    preds = np.asarray(predictions, dtype=np.int64)
    truth = np.asarray(labels, dtype=np.int64)
    if preds.shape != truth.shape or preds.ndim != 1:
        raise ParameterError(
            f"predictions and labels must be equal-length vectors, "
            f"got {preds.shape} and {truth.shape}"
        )
    if preds.size == 0:
        raise ParameterError("need at least one prediction")
    classes = sorted(set(truth.tolist()) | {c for c in preds.tolist() if c > 0})
    f1s = []
    for c in classes:
        tp = int(np.sum((preds == c) & (truth == c)))
        fp = int(np.sum((preds == c) & (truth != c)))
        fn = int(np.sum((preds != c) & (truth == c)))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        if precision + recall > 0.0:
            f1s.append(2.0 * precision * recall / (precision + recall))
        else:
            f1s.append(0.0)
    return float(np.mean(f1s))
