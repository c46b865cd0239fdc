"""Evaluation metrics with missing-label masking (NaN marks a missing label)."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .exceptions import AllLabelsMissing, SingleClassTask


def roc_auc(scores, labels) -> float:
    """Rank-based ROC-AUC of one task; ties get the average rank.

    Raises
    ------
    SingleClassTask
        When the observed labels hold only one class.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=np.float64).ravel()
    observed = ~np.isnan(labels)
    s, y = scores[observed], labels[observed] > 0.5
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClassTask("ROC-AUC needs at least one positive and one negative label")
    ranks = rankdata(s)
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def mean_roc_auc(scores, labels):
    """Mean AUC over tasks (columns), skipping single-class tasks.

    Returns ``(mean, per_task)`` where skipped tasks are NaN in ``per_task``.
    """
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64).T).T
    labels = np.atleast_2d(np.asarray(labels, dtype=np.float64).T).T
    per_task = []
    for t in range(labels.shape[1]):
        try:
            per_task.append(roc_auc(scores[:, t], labels[:, t]))
        except SingleClassTask:
            per_task.append(np.nan)
    per_task = np.array(per_task)
    valid = per_task[~np.isnan(per_task)]
    return (float(valid.mean()) if valid.size else float("nan")), per_task


def rmse(preds, labels) -> float:
    preds = np.asarray(preds, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    observed = ~np.isnan(labels)
    if not observed.any():
        raise AllLabelsMissing("no observed labels")
    diff = preds[observed] - labels[observed]
    return float(np.sqrt(np.mean(diff * diff)))


def per_task_rmse(preds, labels) -> np.ndarray:
    preds = np.atleast_2d(np.asarray(preds, dtype=np.float64).T).T
    labels = np.atleast_2d(np.asarray(labels, dtype=np.float64).T).T
    out = []
    for t in range(labels.shape[1]):
        try:
            out.append(rmse(preds[:, t], labels[:, t]))
        except AllLabelsMissing:
            out.append(np.nan)
    return np.array(out)


def accuracy(scores, labels, threshold=0.0) -> float:
    """Fraction of observed binary labels matched by ``scores > threshold``."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    observed = ~np.isnan(labels)
    if not observed.any():
        raise AllLabelsMissing("no observed labels")
    return float(np.mean((scores[observed] > threshold) == (labels[observed] > 0.5)))
