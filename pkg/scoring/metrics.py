"""
Occupancy metrics: confusion counts, per-class IoU, mIoU and scene-completion IoU.
"""

import math
from typing import Iterable, Optional

import numpy as np

from models.errors import GridError, MetricError
from models.grid import FREE, VoxelGrid
from models.scoring import ConfusionMatrix


def _check_pair(pred: VoxelGrid, gt: VoxelGrid) -> None:
    if pred.spec != gt.spec:
        raise GridError("prediction and ground truth grids have different specs")


def confusion(pred: VoxelGrid, gt: VoxelGrid, ignore: Iterable[int] = ()) -> ConfusionMatrix:
    """Counts over voxels whose ground-truth class is not ignored; rows = ground truth."""
    _check_pair(pred, gt)
    k = max(pred.num_classes, gt.num_classes)
    g = gt.labels.astype(np.int64)
    p = pred.labels.astype(np.int64)
    ignored = list(ignore)
    if ignored:
        keep = ~np.isin(g, ignored)
        g, p = g[keep], p[keep]
    counts = np.bincount(g * k + p, minlength=k * k).reshape(k, k)
    return ConfusionMatrix(counts)


def iou(m: ConfusionMatrix, c: int) -> float:
    """TP / (TP + FP + FN); NaN when the class is absent from both sides."""
    if not 0 <= c < m.num_classes:
        return math.nan
    tp = int(m.counts[c, c])
    denom = int(m.counts[:, c].sum() + m.counts[c, :].sum()) - tp
    return math.nan if denom == 0 else tp / denom


def per_class_iou(m: ConfusionMatrix) -> list[float]:
    return [iou(m, c) for c in range(m.num_classes)]


def miou(m: ConfusionMatrix) -> float:
    """Mean IoU over semantic classes (free excluded) present in either grid."""
    values = [v for v in per_class_iou(m)[FREE + 1:] if not math.isnan(v)]
    if not values:
        raise MetricError("no semantic class present in prediction or ground truth")
    return float(np.mean(values))


def sc_iou_from_confusion(m: ConfusionMatrix) -> float:
    occupied = m.counts[FREE + 1:, FREE + 1:].sum()
    false_pos = m.counts[FREE, FREE + 1:].sum()
    false_neg = m.counts[FREE + 1:, FREE].sum()
    denom = occupied + false_pos + false_neg
    if denom == 0:
        raise MetricError("both grids are entirely free")
    return float(occupied / denom)


def sc_iou(pred: VoxelGrid, gt: VoxelGrid) -> float:
    """IoU of the occupied (non-free) voxel sets."""
    _check_pair(pred, gt)
    a, b = pred.occupied, gt.occupied
    union = int(np.count_nonzero(a | b))
    if union == 0:
        raise MetricError("both grids are entirely free")
    return np.count_nonzero(a & b) / union


def build_report(m: ConfusionMatrix, names: list[str], extra: Optional[dict] = None) -> dict:
    """
    Report dict {sc_iou, miou, per_class: {name: iou | None}}.

    Free space owns sc_iou and is left out of per_class.
    """
    ious = per_class_iou(m)
    report = {
        "sc_iou": sc_iou_from_confusion(m),
        "miou": miou(m),
        "per_class": {
            names[c] if c < len(names) else f"class_{c}": (None if math.isnan(v) else v)
            for c, v in enumerate(ious)
            if c != FREE
        },
    }
    if extra:
        report.update(extra)
    return report
