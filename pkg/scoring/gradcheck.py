"""
Finite-difference verification of the analytic loss gradients.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import softmax

from scoring.losses import cross_entropy, lovasz_softmax, scal_geo, scal_sem

STEP = 1e-6
TOLERANCE = 1e-4
# gradients below this magnitude are compared absolutely
ERROR_FLOOR = 1e-5
# near-one-hot off-class probabilities are multiples of this
LATTICE = 1e-5

LOSSES: dict[str, Callable] = {
    "ce": cross_entropy,
    "lovasz": lovasz_softmax,
    "scal_geo": scal_geo,
    "scal_sem": scal_sem,
}


@dataclass
class GradcheckReport:
    trials: int
    max_error: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(err < TOLERANCE for err in self.max_error.values())


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), ERROR_FLOOR)
    return np.abs(analytic - numeric) / scale


def numeric_gradient(loss: Callable, probs: np.ndarray, labels: np.ndarray, step: float = STEP) -> np.ndarray:
    """Central differences, one probability entry at a time."""
    numeric = np.zeros_like(probs)
    flat = probs.reshape(-1)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + step
        up = loss(probs, labels).value
        flat[i] = saved - step
        down = loss(probs, labels).value
        flat[i] = saved
        numeric.flat[i] = (up - down) / (2.0 * step)
    return numeric


def gradient_error(loss: Callable, probs: np.ndarray, labels: np.ndarray) -> float:
    """Max over entries of the relative error between analytic and central-difference gradients."""
    analytic = loss(probs, labels).gradient
    return float(relative_error(analytic, numeric_gradient(loss, probs.copy(), labels)).max())


def _lovasz_errors_separated(probs: np.ndarray, labels: np.ndarray, gap: float) -> bool:
    for c in range(probs.shape[0]):
        errors = np.sort(np.where(labels == c, 1.0 - probs[c], probs[c]))
        if np.diff(errors).min() < gap:
            return False
    return True


def _near_one_hot(rng: np.random.Generator, k: int, labels: np.ndarray) -> np.ndarray:
    """
    Off-class entries are distinct multiples of LATTICE (at most 1e-3 each) and the
    true class takes the remainder. Draws where two Lovasz errors of one class sit
    closer than half a lattice step are rejected, so no difference step crosses a
    sort breakpoint.
    """
    n = labels.size
    while True:
        probs = np.empty((k, n))
        for j in range(n):
            others = [c for c in range(k) if c != labels[j]]
            probs[others, j] = LATTICE * rng.integers(1, 101, size=k - 1)
            probs[labels[j], j] = 1.0 - probs[others, j].sum()
        if _lovasz_errors_separated(probs, labels, 0.5 * LATTICE):
            return probs


def random_case(rng: np.random.Generator, adversarial: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """A small (K, N) probability table and labels with both free and occupied voxels."""
    k = int(rng.integers(3, 6))
    n = int(rng.integers(4, 9))
    labels = rng.integers(0, k, size=n)
    labels[0], labels[1] = 0, rng.integers(1, k)
    if adversarial:
        return _near_one_hot(rng, k, labels), labels
    return softmax(rng.normal(size=(k, n)), axis=0), labels


def run_gradcheck(seed: int, trials: int, adversarial: bool = False) -> GradcheckReport:
    rng = np.random.default_rng(seed)
    report = GradcheckReport(trials=trials, max_error={name: 0.0 for name in LOSSES})
    for _ in range(trials):
        probs, labels = random_case(rng, adversarial)
        for name, loss in LOSSES.items():
            report.max_error[name] = max(report.max_error[name], gradient_error(loss, probs, labels))
    return report
