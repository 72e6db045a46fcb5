"""
Ranking metrics over flattened scores

auroc is the Mann-Whitney statistic with midranks; auprc is step-wise average
precision with tied scores processed as one threshold.
"""

from typing import Tuple

import numpy as np
from scipy.stats import rankdata

from invargc.models.domain import EdgeScores, InterventionScores, ScoredLabels
from invargc.utils.error_handler import ShapeMismatchError, UndefinedMetricError


def auroc(sl: ScoredLabels) -> float:
    """P(score_pos > score_neg) + 0.5 P(tie)"""
    n_pos, n_neg = sl.n_positive, sl.n_negative
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            "AUROC needs at least one positive and one negative label",
            details={"n_positive": n_pos, "n_negative": n_neg},
        )
    ranks = rankdata(sl.scores, method="average")
    rank_sum = float(ranks[sl.labels == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auprc(sl: ScoredLabels) -> float:
    """Average precision: sum over distinct thresholds of precision x recall increase"""
    n_pos = sl.n_positive
    if n_pos == 0:
        raise UndefinedMetricError("AUPRC needs at least one positive label", details={"n_positive": 0})

    order = np.argsort(-sl.scores, kind="mergesort")
    scores = sl.scores[order]
    labels = sl.labels[order].astype(float)

    # last index of every tie group
    ends = np.r_[np.flatnonzero(np.diff(scores) != 0), scores.size - 1]
    tps = np.cumsum(labels)[ends]
    precision = tps / (ends + 1)
    recall = tps / n_pos
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def evaluate_graph(scores: EdgeScores, truth: np.ndarray) -> Tuple[float, float]:
    """(auroc, auprc) of row-major flattened scores against the adjacency"""
    truth = np.asarray(truth)
    if scores.scores.shape != truth.shape:
        raise ShapeMismatchError(
            "edge scores and adjacency have different shapes",
            details={"scores": list(scores.scores.shape), "truth": list(truth.shape)},
        )
    sl = ScoredLabels.of(scores.scores, truth)
    return auroc(sl), auprc(sl)


def intervention_auroc(iv: InterventionScores, mask: np.ndarray) -> float:
    """AUROC of intervention scores against the N x d x d intervention mask"""
    mask = np.asarray(mask)
    if iv.scores.shape != mask.shape:
        raise ShapeMismatchError(
            "intervention scores and mask have different shapes",
            details={"scores": list(iv.scores.shape), "mask": list(mask.shape)},
        )
    return auroc(ScoredLabels.of(iv.scores, mask))


# ============================================
# Brute-force references
# ============================================

def auroc_pairwise(scores: np.ndarray, labels: np.ndarray) -> float:
    """O(n^2) pair count of the Mann-Whitney statistic"""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos, neg = scores[labels == 1], scores[labels == 0]
    total = 0.0
    for a in pos:
        for b in neg:
            total += 1.0 if a > b else 0.5 if a == b else 0.0
    return total / (len(pos) * len(neg))


def auprc_enumerate(scores: np.ndarray, labels: np.ndarray) -> float:
    """Threshold enumeration: predict positive where score >= tau for each distinct tau"""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    n_pos = int(labels.sum())
    total, previous_recall = 0.0, 0.0
    for tau in sorted(set(scores.tolist()), reverse=True):
        predicted = scores >= tau
        tp = int(np.sum(predicted & (labels == 1)))
        precision = tp / int(predicted.sum())
        recall = tp / n_pos
        total += (recall - previous_recall) * precision
        previous_recall = recall
    return total
