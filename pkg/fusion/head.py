"""
Occupancy head: per-voxel linear stack and class softmax.
"""

import numpy as np

from models.fusion import BlockWeights
from models.grid import GridSpec, VoxelGrid, check_volume
from tools.grid_ops import grid_from_volume_labels
from tools.nn_ops import linear, relu, softmax


def occupancy_head(volume: np.ndarray, w: BlockWeights) -> np.ndarray:
    """C x H x W x Z features -> K x H x W x Z class probabilities."""
    x = check_volume(volume, "head")
    layers = list(w.layers("head"))
    for i, layer in layers:
        x = linear(x, layer["w"], layer["b"], block=f"head.{i}")
        if i < len(layers) - 1:
            x = relu(x)
    return softmax(x, axis=0)


def predict_grid(probs: np.ndarray, grid: GridSpec) -> VoxelGrid:
    """Argmax class per voxel (lowest id on ties)."""
    labels = np.argmax(probs, axis=0).astype(np.uint8)
    return grid_from_volume_labels(labels, grid, probs.shape[0])
