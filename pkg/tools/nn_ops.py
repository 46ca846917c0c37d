"""
Neural primitives: forward-only convolutions, channel-wise linear layers and
activations on channel-first numpy tensors.
"""

import numpy as np
from scipy import ndimage, special

from models.errors import ShapeError


def conv3d(x: np.ndarray, w: np.ndarray, b: np.ndarray, block: str = "conv3d") -> np.ndarray:
    """
    3x3x3 cross-correlation, stride 1, zero padding.

    x: (Cin, H, W, Z); w: (Cout, Cin, 3, 3, 3); b: (Cout,) -> (Cout, H, W, Z).
    """
    if x.ndim != 4:
        raise ShapeError(f"{block}: expected a C x H x W x Z input, got shape {x.shape}")
    if w.ndim != 5 or w.shape[1] != x.shape[0] or w.shape[2:] != (3, 3, 3):
        raise ShapeError(f"{block}: kernel {w.shape} does not fit input with {x.shape[0]} channels")
    if b.shape != (w.shape[0],):
        raise ShapeError(f"{block}: bias {b.shape} does not match {w.shape[0]} output channels")
    out = np.empty((w.shape[0],) + x.shape[1:])
    for o in range(w.shape[0]):
        acc = np.full(x.shape[1:], b[o], dtype=np.float64)
        for i in range(x.shape[0]):
            if np.any(w[o, i]):
                acc += ndimage.correlate(x[i], w[o, i], mode="constant", cval=0.0)
        out[o] = acc
    return out


def linear(x: np.ndarray, w: np.ndarray, b: np.ndarray, block: str = "linear") -> np.ndarray:
    """Apply W x + b along the leading channel axis: (Cin, ...) -> (Cout, ...)."""
    if w.ndim != 2 or w.shape[1] != x.shape[0]:
        raise ShapeError(f"{block}: weight {w.shape} does not fit input with {x.shape[0]} channels")
    if b.shape != (w.shape[0],):
        raise ShapeError(f"{block}: bias {b.shape} does not match {w.shape[0]} outputs")
    out = np.tensordot(w, x, axes=(1, 0))
    return out + b.reshape((-1,) + (1,) * (x.ndim - 1))


def linear_last(x: np.ndarray, w: np.ndarray, b: np.ndarray, block: str = "linear") -> np.ndarray:
    """Apply W x + b along the trailing axis: (..., Cin) -> (..., Cout)."""
    if w.ndim != 2 or w.shape[1] != x.shape[-1]:
        raise ShapeError(f"{block}: weight {w.shape} does not fit input with {x.shape[-1]} features")
    return x @ w.T + b


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return special.expit(x)


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def softmax(x: np.ndarray, axis: int = 0) -> np.ndarray:
    return special.softmax(x, axis=axis)


def batch_norm(x: np.ndarray, scale: np.ndarray, shift: np.ndarray) -> np.ndarray:
    """Inference-form batch norm folded to a per-channel affine map."""
    shape = (-1,) + (1,) * (x.ndim - 1)
    return x * scale.reshape(shape) + shift.reshape(shape)
