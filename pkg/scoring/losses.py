"""
Occupancy losses on class probabilities, each with an analytic gradient.

Every loss takes `probs` with the class axis first (K x ...), integer
`labels` shaped like the spatial axes, and an optional boolean
`ignore_mask` (True = voxel excluded). Gradients have the shape of `probs`.
"""

import operator
from functools import reduce
from typing import Optional

import numpy as np

from models.errors import LossSupportError, ShapeError
from models.grid import FREE
from models.scoring import LossResult

CE_CLAMP = 1e-12
AFFINITY_CLAMP = 1e-6

# Weights of the composite loss: CE, Lovasz, geometric affinity, semantic affinity
TOTAL_WEIGHTS = {"ce": 1.0, "lovasz": 5.0, "scal_geo": 1.0, "scal_sem": 1.0}


def _flatten(probs, labels, ignore_mask) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(K, N) probabilities, (N,) labels and (N,) kept-voxel indices."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.ndim < 1 or probs.shape[1:] != labels.shape:
        raise ShapeError(f"losses: probs {probs.shape} do not match labels {labels.shape}")
    k = probs.shape[0]
    p = probs.reshape(k, -1)
    y = labels.reshape(-1).astype(np.int64)
    if y.size and (y.min() < 0 or y.max() >= k):
        raise ShapeError(f"losses: labels must lie in [0, {k}), got range [{y.min()}, {y.max()}]")
    keep = np.ones(y.size, dtype=bool)
    if ignore_mask is not None:
        ignore = np.asarray(ignore_mask, dtype=bool)
        if ignore.shape != labels.shape:
            raise ShapeError(f"losses: ignore mask {ignore.shape} does not match labels {labels.shape}")
        keep &= ~ignore.reshape(-1)
    kept = np.flatnonzero(keep)
    if kept.size == 0:
        raise LossSupportError("empty loss support")
    return p, y, kept


def cross_entropy(
    probs, labels, ignore_mask=None, class_weights: Optional[np.ndarray] = None
) -> LossResult:
    """Weighted mean of -log p(true class) over kept voxels."""
    p, y, kept = _flatten(probs, labels, ignore_mask)
    k = p.shape[0]
    weights = np.ones(k) if class_weights is None else np.asarray(class_weights, dtype=np.float64)
    if weights.shape != (k,) or weights.min() < 0:
        raise ShapeError(f"cross_entropy: class weights must be {k} nonnegative numbers")
    yk = y[kept]
    wv = weights[yk]
    norm = wv.sum()
    if norm <= 0:
        raise LossSupportError("empty loss support")

    p_true = p[yk, kept]
    clamped = np.maximum(p_true, CE_CLAMP)
    value = float(np.sum(wv * -np.log(clamped)) / norm)

    grad = np.zeros_like(p)
    grad[yk, kept] = np.where(p_true > CE_CLAMP, -wv / (clamped * norm), 0.0)
    return LossResult(value, grad.reshape(np.shape(probs)))


def _lovasz_grad(fg_sorted: np.ndarray) -> np.ndarray:
    """Discrete gradient of the Jaccard loss along a sorted prefix."""
    gts = fg_sorted.sum()
    intersection = gts - np.cumsum(fg_sorted)
    union = gts + np.cumsum(1.0 - fg_sorted)
    jaccard = 1.0 - intersection / union
    jaccard[1:] = jaccard[1:] - jaccard[:-1]
    return jaccard


def lovasz_softmax(probs, labels, ignore_mask=None) -> LossResult:
    """Lovasz extension of the Jaccard loss, averaged over classes present in labels."""
    p, y, kept = _flatten(probs, labels, ignore_mask)
    yk = y[kept]
    grad = np.zeros_like(p)
    present = np.unique(yk)
    total = 0.0
    for c in present:
        fg = (yk == c).astype(np.float64)
        pc = p[c, kept]
        errors = np.where(fg == 1.0, 1.0 - pc, pc)
        order = np.argsort(-errors, kind="stable")
        g = _lovasz_grad(fg[order])
        total += float(np.dot(errors[order], g))
        d_err = np.empty_like(g)
        d_err[order] = g
        grad[c, kept] += np.where(fg == 1.0, -d_err, d_err)
    n = len(present)
    return LossResult(total / n, (grad / n).reshape(np.shape(probs)))


def _affinity(x_raw: np.ndarray, gt: np.ndarray) -> tuple[float, np.ndarray]:
    """
    -(log precision + log recall + log specificity) of soft scores vs a binary target.

    Terms whose ground-truth side is empty are dropped. Returns the value and
    d(value)/d(x_raw) with zero gradient where the clamp is active.
    """
    x = np.clip(x_raw, AFFINITY_CLAMP, 1.0 - AFFINITY_CLAMP)
    active = (x_raw > AFFINITY_CLAMP) & (x_raw < 1.0 - AFFINITY_CLAMP)
    n_pos, n_neg = int(gt.sum()), int((~gt).sum())
    value = 0.0
    d_x = np.zeros_like(x)
    if n_pos:
        hit = np.sum(x[gt])
        spent = np.sum(x)
        value -= np.log(hit / spent) + np.log(hit / n_pos)
        d_x += np.where(gt, -2.0 / hit, 0.0) + 1.0 / spent
    if n_neg:
        rejected = np.sum(1.0 - x[~gt])
        value -= np.log(rejected / n_neg)
        d_x += np.where(gt, 0.0, 1.0 / rejected)
    return float(value), np.where(active, d_x, 0.0)


def scal_geo(probs, labels, ignore_mask=None) -> LossResult:
    """Geometric scene-class affinity on the occupied score 1 - p(free)."""
    p, y, kept = _flatten(probs, labels, ignore_mask)
    gt = y[kept] != FREE
    value, d_x = _affinity(1.0 - p[FREE, kept], gt)
    grad = np.zeros_like(p)
    grad[FREE, kept] = -d_x
    return LossResult(value, grad.reshape(np.shape(probs)))


def scal_sem(probs, labels, ignore_mask=None) -> LossResult:
    """Per-class affinity averaged over the classes present in labels."""
    p, y, kept = _flatten(probs, labels, ignore_mask)
    yk = y[kept]
    present = np.unique(yk)
    grad = np.zeros_like(p)
    total = 0.0
    for c in present:
        value, d_x = _affinity(p[c, kept], yk == c)
        total += value
        grad[c, kept] += d_x
    n = len(present)
    return LossResult(total / n, (grad / n).reshape(np.shape(probs)))


def component_losses(probs, labels, ignore_mask=None) -> dict[str, LossResult]:
    return {
        "ce": cross_entropy(probs, labels, ignore_mask),
        "lovasz": lovasz_softmax(probs, labels, ignore_mask),
        "scal_geo": scal_geo(probs, labels, ignore_mask),
        "scal_sem": scal_sem(probs, labels, ignore_mask),
    }


def total_loss(probs, labels, ignore_mask=None) -> LossResult:
    """1 * CE + 5 * Lovasz + 1 * geometric affinity + 1 * semantic affinity."""
    parts = component_losses(probs, labels, ignore_mask)
    return reduce(operator.add, (parts[name].scaled(weight) for name, weight in TOTAL_WEIGHTS.items()))
