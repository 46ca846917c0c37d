"""
Local adaptive fusion: voxel-wise convex combination of camera and radar volumes.
"""

import numpy as np

from models.errors import ShapeError
from models.fusion import BlockWeights
from models.grid import check_volume
from tools.nn_ops import conv3d, relu, sigmoid


def laf(f_c: np.ndarray, f_r: np.ndarray, w: BlockWeights) -> tuple[np.ndarray, np.ndarray]:
    """
    Returns:
        (F_laf, W_laf) where W_laf (1 x H x W x Z) weights the camera volume.
    """
    f_c = check_volume(f_c, "laf")
    f_r = check_volume(f_r, "laf")
    if f_c.shape != f_r.shape:
        raise ShapeError(f"laf: camera volume {f_c.shape} and radar volume {f_r.shape} differ")

    x = np.concatenate([f_c, f_r], axis=0)
    layers = list(w.layers("laf.fw"))
    for i, layer in layers:
        x = conv3d(x, layer["w"], layer["b"], block=f"laf.fw.{i}")
        if i < len(layers) - 1:
            x = relu(x)
    if x.shape[0] != 1:
        raise ShapeError(f"laf: weight net must end in 1 channel, got {x.shape[0]}")
    weight = sigmoid(x)
    return weight * f_c + (1.0 - weight) * f_r, weight
