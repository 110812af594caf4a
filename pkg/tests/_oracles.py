"""Brute-force metric definitions, quadratic on purpose."""
import numpy as np


def brute_ap(scores, labels):
    """Rank by pairwise counting, then the step sum over every cutoff."""
    n = len(scores)
    rank = [sum(1 for j in range(n) if scores[j] > scores[i] or (scores[j] == scores[i] and j < i)) for i in range(n)]
    ranked = [labels[i] for i in sorted(range(n), key=lambda i: rank[i])]
    n_pos = sum(labels)
    ap, prev_recall = 0.0, 0.0
    for k in range(1, n + 1):
        tp = sum(ranked[:k])
        recall = tp / n_pos
        ap += (recall - prev_recall) * (tp / k)
        prev_recall = recall
    return ap


def brute_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    wins = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return wins / (len(pos) * len(neg))


def random_instance(rng, n):
    labels = rng.integers(0, 2, n)
    labels[rng.integers(n)] = 1
    labels[rng.integers(n)] = 0
    if labels.sum() in (0, n):
        labels[0], labels[-1] = 1, 0
    # coarse rounding gives plenty of ties
    scores = np.round(rng.random(n), int(rng.integers(1, 4)))
    return scores.tolist(), labels.tolist()
