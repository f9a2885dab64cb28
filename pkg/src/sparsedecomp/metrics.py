"""Pixelwise segmentation scores and the cross-entropy loss.

All functions evaluate over the full image by default; passing a binary
``region`` mask restricts them to that domain (the usual convention for
fundus imagery, where scores are taken inside the field of view).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import as_grid, require_same_shape

CROSS_ENTROPY_EPS = 1e-7


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def _require_binary(a: np.ndarray, name: str) -> None:
    if not np.all((a == 0.0) | (a == 1.0)):
        raise ValueError(f"{name} must be binary (0/1 values only)")


def _region_mask(shape, region) -> np.ndarray:
    if region is None:
        return np.ones(shape, dtype=bool)
    region = as_grid(region)
    if region.shape != shape:
        raise ValueError(f"region shape {region.shape} does not match {shape}")
    _require_binary(region, "region")
    return region == 1.0


def confusion(pred_mask, truth, region=None) -> ConfusionCounts:
    """Pixel counts of the four prediction/truth agreement cases."""
    pred_mask, truth = as_grid(pred_mask), as_grid(truth)
    require_same_shape(pred_mask, truth)
    _require_binary(pred_mask, "pred_mask")
    _require_binary(truth, "truth")
    sel = _region_mask(pred_mask.shape, region)
    p = pred_mask[sel] == 1.0
    t = truth[sel] == 1.0
    return ConfusionCounts(
        tp=int(np.sum(p & t)),
        fp=int(np.sum(p & ~t)),
        fn=int(np.sum(~p & t)),
        tn=int(np.sum(~p & ~t)),
    )


def acc(c: ConfusionCounts) -> float:
    """Accuracy (tp + tn) / total."""
    if c.total == 0:
        raise ValueError("accuracy undefined on an empty region")
    return (c.tp + c.tn) / c.total


def mcc(c: ConfusionCounts) -> float:
    """Matthews correlation; 0 by convention when the denominator vanishes."""
    if c.total == 0:
        raise ValueError("MCC undefined on an empty region")
    denom = ((c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn))
    if denom == 0:
        return 0.0
    return (c.tp * c.tn - c.fp * c.fn) / float(np.sqrt(denom))


def auc(scores, truth, region=None) -> float:
    """Exact rank-statistic AUC, ties counted one half.

    Equals the probability that a uniformly chosen positive pixel outranks
    a uniformly chosen negative one. Requires both classes present inside
    the region.
    """
    scores, truth = as_grid(scores), as_grid(truth)
    require_same_shape(scores, truth)
    _require_binary(truth, "truth")
    sel = _region_mask(scores.shape, region)
    s = scores[sel]
    t = truth[sel] == 1.0
    n_pos = int(np.sum(t))
    n_neg = int(t.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative pixel")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(s.size)
    sorted_s = s[order]
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum = float(np.sum(ranks[t]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def roc_points(scores, truth, region=None) -> tuple[np.ndarray, np.ndarray]:
    """(FPR, TPR) points swept over every distinct score threshold."""
    scores, truth = as_grid(scores), as_grid(truth)
    require_same_shape(scores, truth)
    _require_binary(truth, "truth")
    sel = _region_mask(scores.shape, region)
    s = scores[sel]
    t = truth[sel] == 1.0
    n_pos = int(np.sum(t))
    n_neg = int(t.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs at least one positive and one negative pixel")
    thresholds = np.unique(s)[::-1]
    fpr = [0.0]
    tpr = [0.0]
    for thr in thresholds:
        pred = s >= thr
        tpr.append(float(np.sum(pred & t)) / n_pos)
        fpr.append(float(np.sum(pred & ~t)) / n_neg)
    return np.asarray(fpr), np.asarray(tpr)


def cross_entropy(scores, truth, region=None) -> float:
    """Mean binary cross-entropy with predictions clamped to [eps, 1 - eps].

    The clamp (eps = 1e-7) keeps hard 0/1 scores finite.
    """
    scores, truth = as_grid(scores), as_grid(truth)
    require_same_shape(scores, truth)
    _require_binary(truth, "truth")
    sel = _region_mask(scores.shape, region)
    p = scores[sel]
    t = truth[sel]
    if p.size == 0:
        raise ValueError("cross-entropy undefined on an empty region")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("scores must lie in [0, 1]")
    p = np.clip(p, CROSS_ENTROPY_EPS, 1.0 - CROSS_ENTROPY_EPS)
    return float(np.mean(-t * np.log(p) - (1.0 - t) * np.log(1.0 - p)))


def sparsity_fraction(v, threshold: float) -> float:
    """Fraction of pixels whose magnitude exceeds the threshold."""
    if threshold < 0:
        raise ValueError(f"threshold must be nonnegative, got {threshold}")
    v = as_grid(v)
    return float(np.mean(np.abs(v) > threshold))
