from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


def _check(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    return s, y.astype(bool)


def average_precision(scores, labels) -> float:
    """Step-sum AP over the descending-score ranking.

    Ties are broken by input position (stable sort), so the result is
    deterministic but depends on order within tied scores.
    """
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise ValueError("average precision needs at least one positive")
    order = np.argsort(-s, kind="stable")
    hits = y[order]
    tp = np.cumsum(hits)
    precision = tp / np.arange(1, len(hits) + 1)
    # recall increases by 1/n_pos exactly at the positives
    return float(precision[hits].sum() / n_pos)


def roc_auc(scores, labels) -> float:
    """Probability that a random positive outranks a random negative (ties 1/2)."""
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC AUC needs both classes")
    # midranks handle ties
    order = np.argsort(s, kind="stable")
    ranks = np.empty(len(s))
    sorted_s = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass
class MetricsReport:
    ap: float
    auc: float
    positives: int
    negatives: int
    setting: str = "transductive"

    def to_dict(self) -> dict:
        return asdict(self)


def metrics_report(scores, labels, setting: str = "transductive") -> MetricsReport:
    s, y = _check(scores, labels)
    return MetricsReport(
        ap=average_precision(s, y),
        auc=roc_auc(s, y),
        positives=int(y.sum()),
        negatives=int((~y).sum()),
        setting=setting,
    )
