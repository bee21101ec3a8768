"""Evaluation metrics: accuracy, F1 (binary/weighted), AUC (binary and
weighted one-vs-rest), log loss.

AUC follows the Mann-Whitney convention with ties credited 1/2.  The binary
positive class defaults to the numerically greater label id.
"""

from __future__ import annotations

import warnings

import numpy as np

from .errors import MetricError, ParameterError

LOG_LOSS_EPS = 1e-15


def _check_paired(truth, predicted):
    truth = np.asarray(truth)
    predicted = np.asarray(predicted)
    if truth.ndim != 1 or predicted.shape[0] != truth.shape[0]:
        raise MetricError("truth and prediction lengths differ")
    if truth.shape[0] < 1:
        raise MetricError("metrics need at least one row")
    return truth, predicted


def accuracy(truth, predicted) -> float:
    truth, predicted = _check_paired(truth, predicted)
    if predicted.ndim != 1:
        raise MetricError("accuracy expects 1-D class predictions")
    return float(np.mean(truth == predicted))


def _binary_f1(truth, predicted, positive) -> float:
    tp = int(np.sum((predicted == positive) & (truth == positive)))
    fp = int(np.sum((predicted == positive) & (truth != positive)))
    fn = int(np.sum((predicted != positive) & (truth == positive)))
    if tp == 0 and (fp > 0 or fn > 0):
        return 0.0
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)


def f1(truth, predicted, mode: str = "binary", positive=None) -> float:
    """F1 score.

    mode='binary' scores one positive class (default: the greater label id);
    mode='weighted' is the support-weighted mean of per-class one-vs-rest F1.
    """
    truth, predicted = _check_paired(truth, predicted)
    if predicted.ndim != 1:
        raise MetricError("f1 expects 1-D class predictions")
    if mode == "binary":
        if positive is None:
            positive = np.max(truth)
        return float(_binary_f1(truth, predicted, positive))
    if mode == "weighted":
        classes, support = np.unique(truth, return_counts=True)
        scores = np.array([_binary_f1(truth, predicted, c) for c in classes])
        return float(np.sum(scores * support) / np.sum(support))
    raise ParameterError(f"unknown f1 mode {mode!r}")


def auc_binary(truth, scores) -> float:
    """Mann-Whitney AUC of a positive-class score; ties count 1/2.

    The positive class is the greater of the two label ids present.
    """
    truth, scores = _check_paired(truth, scores)
    if scores.ndim != 1:
        raise MetricError("auc_binary expects a 1-D score vector")
    classes = np.unique(truth)
    if classes.shape[0] != 2:
        raise MetricError(f"auc_binary needs exactly 2 classes, got {classes.shape[0]}")
    pos = truth == classes[1]
    n_pos = int(pos.sum())
    n_neg = truth.shape[0] - n_pos
    # rank-sum formulation; identical to averaging over all pos x neg pairs
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(truth.shape[0], dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < truth.shape[0]:
        j = i
        while j + 1 < truth.shape[0] and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum_pos = float(ranks[pos].sum())
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def auc_weighted_ovr(truth, class_scores) -> float:
    """Support-weighted mean of one-vs-rest AUCs.

    ``class_scores`` is (n_rows, n_classes); column c scores class id c.
    Classes absent from ``truth`` are skipped with renormalized weights and a
    recorded warning.
    """
    truth = np.asarray(truth)
    class_scores = np.asarray(class_scores, dtype=np.float64)
    if class_scores.ndim != 2 or class_scores.shape[0] != truth.shape[0]:
        raise MetricError("class_scores must be (n_rows, n_classes)")
    n_classes = class_scores.shape[1]
    if n_classes < 2:
        raise MetricError("auc_weighted_ovr needs >= 2 classes")
    total = 0.0
    weight = 0.0
    skipped = []
    for c in range(n_classes):
        indicator = (truth == c).astype(np.int8)
        support = int(indicator.sum())
        if support == 0 or support == truth.shape[0]:
            skipped.append(c)
            continue
        total += support * auc_binary(indicator, class_scores[:, c])
        weight += support
    if skipped:
        warnings.warn(
            f"auc_weighted_ovr: classes {skipped} absent or exhaustive; "
            "skipped with weight renormalization",
            stacklevel=2,
        )
    if weight == 0.0:
        raise MetricError("auc_weighted_ovr: no scorable class")
    return float(total / weight)


def log_loss(truth, class_probs) -> float:
    """Mean negative log of the probability assigned to the true class."""
    truth = np.asarray(truth)
    class_probs = np.asarray(class_probs, dtype=np.float64)
    if class_probs.ndim != 2 or class_probs.shape[0] != truth.shape[0]:
        raise MetricError("class_probs must be (n_rows, n_classes)")
    if truth.shape[0] < 1:
        raise MetricError("metrics need at least one row")
    idx = truth.astype(np.int64)
    if idx.min() < 0 or idx.max() >= class_probs.shape[1]:
        raise MetricError("truth contains a class id outside the probability columns")
    p = class_probs[np.arange(truth.shape[0]), idx]
    p = np.clip(p, LOG_LOSS_EPS, 1.0 - LOG_LOSS_EPS)
    return float(-np.mean(np.log(p)))
