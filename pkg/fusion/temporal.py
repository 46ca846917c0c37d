"""
Temporal fusion: warp past volumes into the current frame and merge them
with a conv / batch-norm / ReLU bottleneck.
"""

import numpy as np

from models.errors import ShapeError
from models.fusion import BlockWeights
from models.geometry import RigidPose
from models.grid import GridSpec, check_volume
from tools.geometry import trilinear_sample
from tools.grid_ops import meters_to_volume_index, volume_centers
from tools.nn_ops import batch_norm, conv3d, relu


def align(past: np.ndarray, current_to_past: RigidPose, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """
    Resample a past volume on the current frame's voxel centers.

    Returns:
        (aligned C x H x W x Z volume, H x W x Z out-of-bounds mask)
    """
    centers = volume_centers(grid)
    index = meters_to_volume_index(current_to_past.apply(centers.reshape(-1, 3)), grid)
    samples = trilinear_sample(past, index.reshape(centers.shape))
    return np.moveaxis(samples.values, -1, 0), samples.out_of_bounds


def bottleneck(x: np.ndarray, w: BlockWeights) -> np.ndarray:
    for i, layer in w.layers("temporal.bottleneck"):
        x = conv3d(x, layer["w"], layer["b"], block=f"temporal.bottleneck.{i}")
        x = relu(batch_norm(x, layer["scale"], layer["shift"]))
    return x


def temporal_fuse(
    volumes: list[np.ndarray], poses: list[RigidPose], grid: GridSpec, w: BlockWeights
) -> np.ndarray:
    """
    Args:
        volumes: T volumes, current frame first and oldest last.
        poses: T-1 transforms taking current-frame points into each past frame.
        grid: grid the volumes are laid over.

    Returns:
        Fused C x H x W x Z volume.
    """
    if not volumes:
        raise ShapeError("temporal: no volumes given")
    if len(poses) != len(volumes) - 1:
        raise ShapeError(f"temporal: {len(volumes)} volumes need {len(volumes) - 1} poses, got {len(poses)}")
    current = check_volume(volumes[0], "temporal")
    if current.shape[1:] != grid.volume_shape:
        raise ShapeError(f"temporal: volume {current.shape[1:]} does not match grid {grid.volume_shape}")
    stack = [current]
    for past, pose in zip(volumes[1:], poses):
        past = check_volume(past, "temporal", current.shape[0])
        if past.shape != current.shape:
            raise ShapeError(f"temporal: past volume {past.shape} differs from current {current.shape}")
        stack.append(align(past, pose, grid)[0])
    return bottleneck(np.concatenate(stack, axis=0), w)
