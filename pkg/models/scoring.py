"""
Scoring data model: loss values with their gradients, and confusion counts.
"""

from dataclasses import dataclass

import numpy as np

from models.errors import MetricError, ShapeError


@dataclass(frozen=True, eq=False)
class LossResult:
    """A scalar loss and its gradient w.r.t. the (K, ...) probability volume."""

    value: float
    gradient: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ShapeError(f"loss value is not finite: {self.value}")
        if not np.all(np.isfinite(self.gradient)):
            raise ShapeError("loss gradient has non-finite entries")

    def scaled(self, weight: float) -> "LossResult":
        return LossResult(weight * self.value, weight * self.gradient)

    def __add__(self, other: "LossResult") -> "LossResult":
        if self.gradient.shape != other.gradient.shape:
            raise ShapeError(
                f"cannot add losses with gradients {self.gradient.shape} and {other.gradient.shape}"
            )
        return LossResult(self.value + other.value, self.gradient + other.gradient)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """K x K voxel counts; rows are ground truth, columns are predictions."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise MetricError(f"confusion matrix must be square, got {c.shape}")
        if c.size and c.min() < 0:
            raise MetricError("confusion counts must be nonnegative")
        object.__setattr__(self, "counts", c)

    @property
    def num_classes(self) -> int:
        return int(self.counts.shape[0])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        k = max(self.num_classes, other.num_classes)
        out = np.zeros((k, k), dtype=np.int64)
        out[: self.num_classes, : self.num_classes] += self.counts
        out[: other.num_classes, : other.num_classes] += other.counts
        return ConfusionMatrix(out)

    def tp(self) -> np.ndarray:
        return np.diag(self.counts)

    def fp(self) -> np.ndarray:
        return self.counts.sum(axis=0) - self.tp()

    def fn(self) -> np.ndarray:
        return self.counts.sum(axis=1) - self.tp()
