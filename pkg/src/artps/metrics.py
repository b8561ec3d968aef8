"""Detection, depth, and ranking metrics.

Everything here is small enough to verify against brute-force pair counting,
which the test suite does; the implementations favor closed-form rank
statistics over sweep loops where possible.
"""

from __future__ import annotations

import numpy as np


def _as_1d(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def _check_binary(scores: np.ndarray, labels: np.ndarray) -> np.ndarray:
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have equal length")
    lab = labels.astype(np.int64)
    if not np.all((lab == 0) | (lab == 1)):
        raise ValueError("labels must be binary 0/1")
    if lab.min() == lab.max():
        raise ValueError("labels contain a single class; AUROC/AUPRC undefined")
    return lab


def average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the mean of their covered positions."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x), dtype=np.float64)
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(scores, labels) -> float:
    """AUROC via the Mann-Whitney U statistic with average-rank tie handling."""
    s = _as_1d(scores, "scores")
    lab = _check_binary(s, _as_1d(labels, "labels"))
    ranks = average_ranks(s)
    n_pos = int(lab.sum())
    n_neg = len(lab) - n_pos
    u = ranks[lab == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def pr_auc(scores, labels) -> float:
    """Average-precision-style step integration of the PR curve.

    Thresholds descend through distinct score values; tied scores enter as one
    block so the result does not depend on input order.
    """
    s = _as_1d(scores, "scores")
    lab = _check_binary(s, _as_1d(labels, "labels"))
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    lab_sorted = lab[order]
    n_pos = int(lab.sum())
    tp = 0
    fp = 0
    prev_recall = 0.0
    auc = 0.0
    i = 0
    n = len(s_sorted)
    while i < n:
        j = i
        while j + 1 < n and s_sorted[j + 1] == s_sorted[i]:
            j += 1
        block = lab_sorted[i : j + 1]
        tp += int(block.sum())
        fp += int(len(block) - block.sum())
        recall = tp / n_pos
        precision = tp / (tp + fp)
        auc += (recall - prev_recall) * precision
        prev_recall = recall
        i = j + 1
    return float(auc)


def f1_fpr(scores, labels, threshold: float) -> dict[str, float]:
    """Confusion metrics at a fixed decision threshold (score >= threshold).

    Undefined ratios (zero denominators) report 0 rather than NaN so batch
    evaluation over degenerate frames stays finite.
    """
    s = _as_1d(scores, "scores")
    lab = _as_1d(labels, "labels").astype(np.int64)
    if s.shape != lab.shape:
        raise ValueError("scores and labels must have equal length")
    if not np.all((lab == 0) | (lab == 1)):
        raise ValueError("labels must be binary 0/1")
    pred = s >= threshold
    tp = int(np.sum(pred & (lab == 1)))
    fp = int(np.sum(pred & (lab == 0)))
    fn = int(np.sum(~pred & (lab == 1)))
    tn = int(np.sum(~pred & (lab == 0)))
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    fpr = fp / (fp + tn) if fp + tn > 0 else 0.0
    return {"precision": precision, "recall": recall, "f1": f1, "fpr": fpr}


def depth_errors(d, d_hat) -> dict[str, float]:
    """Relative absolute, RMS, mean absolute, and log10 depth errors."""
    dd = _as_1d(d, "d")
    dh = _as_1d(d_hat, "d_hat")
    if dd.shape != dh.shape:
        raise ValueError("depth arrays must have equal length")
    if dd.size == 0:
        raise ValueError("depth metrics need at least one sample")
    if np.any(dd <= 0) or np.any(dh <= 0):
        raise ValueError("depths must be positive")
    diff = dd - dh
    return {
        "rae": float(np.mean(np.abs(diff) / dd)),
        "rmse": float(np.sqrt(np.mean(diff**2))),
        "mae": float(np.mean(np.abs(diff))),
        "log10": float(np.mean(np.abs(np.log10(dd) - np.log10(dh)))),
    }


def delta_accuracy(d, d_hat, delta: float) -> float:
    """Fraction of pixels whose depth ratio (either way) stays below delta."""
    dd = _as_1d(d, "d")
    dh = _as_1d(d_hat, "d_hat")
    if dd.shape != dh.shape:
        raise ValueError("depth arrays must have equal length")
    if dd.size == 0:
        raise ValueError("depth metrics need at least one sample")
    if np.any(dd <= 0) or np.any(dh <= 0):
        raise ValueError("depths must be positive")
    ratio = np.maximum(dd / dh, dh / dd)
    return float(np.mean(ratio < delta))


DELTA_THRESHOLDS = (1.25, 1.25**2, 1.25**3)


def dcg_at_k(gains, k: int) -> float:
    g = _as_1d(gains, "gains")[: max(k, 0)]
    if g.size == 0:
        return 0.0
    i = np.arange(1, len(g) + 1, dtype=np.float64)
    return float(np.sum((np.exp2(g) - 1.0) / np.log2(i + 1.0)))


def ndcg_at_k(gains_in_ranked_order, k: int) -> float:
    """Normalized discounted cumulative gain of a predicted ranking.

    gains_in_ranked_order lists the true relevance of each item in predicted
    rank order. All-zero gains define nDCG = 0.
    """
    g = _as_1d(gains_in_ranked_order, "gains")
    if np.any(g < 0):
        raise ValueError("relevance gains must be nonnegative")
    ideal = np.sort(g)[::-1]
    idcg = dcg_at_k(ideal, k)
    if idcg <= 0:
        return 0.0
    return dcg_at_k(g, k) / idcg


def spearman(a, b) -> float:
    """Spearman rho: Pearson correlation of average ranks."""
    ra = average_ranks(_as_1d(a, "a"))
    rb = average_ranks(_as_1d(b, "b"))
    if ra.shape != rb.shape:
        raise ValueError("inputs must have equal length")
    if ra.size < 2:
        raise ValueError("correlation needs at least two samples")
    da = ra - ra.mean()
    db = rb - rb.mean()
    denom = np.sqrt(np.sum(da**2) * np.sum(db**2))
    if denom == 0:
        raise ValueError("constant input; correlation undefined")
    return float(np.sum(da * db) / denom)


def kendall(a, b) -> float:
    """Kendall tau-b (tie-corrected) from vectorized pairwise sign products."""
    av = _as_1d(a, "a")
    bv = _as_1d(b, "b")
    if av.shape != bv.shape:
        raise ValueError("inputs must have equal length")
    n = av.size
    if n < 2:
        raise ValueError("correlation needs at least two samples")
    sa = np.sign(av[:, None] - av[None, :])
    sb = np.sign(bv[:, None] - bv[None, :])
    iu = np.triu_indices(n, k=1)
    prod = sa[iu] * sb[iu]
    concordant = np.sum(prod > 0)
    discordant = np.sum(prod < 0)
    ties_a = np.sum(sa[iu] == 0)
    ties_b = np.sum(sb[iu] == 0)
    n0 = n * (n - 1) / 2.0
    denom = np.sqrt((n0 - ties_a) * (n0 - ties_b))
    if denom == 0:
        raise ValueError("constant input; correlation undefined")
    return float((concordant - discordant) / denom)
