"""
Radar pillar encoder: per-point MLP, max-pool per pillar, scatter to the BEV plane.
"""

import numpy as np

from models.fusion import PILLAR_FEATURES, BlockWeights
from models.geometry import LabeledPointCloud
from models.grid import GridSpec
from tools.grid_ops import points_to_voxels
from tools.nn_ops import linear_last, relu


def decorate(radar_pts: LabeledPointCloud, spec: GridSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Per-point features (x, y, z, vx, vy, amp, snr, t, dx, dy) for points inside the grid.

    Returns:
        (features (M, 10), pillar row iy, pillar column ix) for the M in-grid points.
    """
    ijk, valid = points_to_voxels(radar_pts.xyz, spec)
    xyz = radar_pts.xyz[valid]
    ix, iy = ijk[valid, 0], ijk[valid, 1]
    centers = spec.mins[:2] + (np.stack([ix, iy], axis=1) + 0.5) * spec.voxel_size
    raw = [xyz[:, 0], xyz[:, 1], xyz[:, 2]]
    raw += [radar_pts.get(name)[valid] for name in PILLAR_FEATURES[3:8]]
    raw += [xyz[:, 0] - centers[:, 0], xyz[:, 1] - centers[:, 1]]
    return np.stack(raw, axis=1), iy, ix


def pillar_encode(radar_pts: LabeledPointCloud, spec: GridSpec, w: BlockWeights) -> np.ndarray:
    """
    Encode a radar cloud into a C x H x W BEV plane (H = NY, W = NX).

    Points outside the grid are dropped; empty pillars stay zero.
    """
    weight, bias = w["pillar.w"], w["pillar.b"]
    nx, ny, _ = spec.dims
    c = weight.shape[0]
    out = np.zeros((ny * nx, c))
    if len(radar_pts):
        feats, iy, ix = decorate(radar_pts, spec)
        if len(feats):
            point_feats = relu(linear_last(feats, weight, bias, block="pillar"))
            # ReLU output is nonnegative, so a zero buffer is a neutral max-pool start
            np.maximum.at(out, iy * nx + ix, point_feats)
    return np.ascontiguousarray(out.T.reshape(c, ny, nx))
