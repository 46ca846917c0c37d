"""
Geometry Tool: rigid transforms, pinhole projection and grid interpolation kernels.
"""

import itertools
from typing import NamedTuple, Union

import numpy as np

from models.geometry import CameraModel, LabeledPointCloud, RigidPose

Points = Union[LabeledPointCloud, np.ndarray]


class Projection(NamedTuple):
    uv: np.ndarray  # (N, 2) pixel coordinates, zero where invalid
    depth: np.ndarray  # (N,) camera-frame z
    valid: np.ndarray  # (N,) bool


class Samples(NamedTuple):
    values: np.ndarray  # (..., C)
    out_of_bounds: np.ndarray  # (...,) bool


def _xyz(pts: Points) -> np.ndarray:
    if isinstance(pts, LabeledPointCloud):
        return pts.xyz
    return np.asarray(pts, dtype=np.float64).reshape(-1, 3)


def transform_points(pts: Points, pose: RigidPose) -> Points:
    """p' = R p + t; a LabeledPointCloud keeps its attributes."""
    if isinstance(pts, LabeledPointCloud):
        return pts.with_xyz(pose.apply(pts.xyz))
    return pose.apply(np.asarray(pts, dtype=np.float64))


def project_to_image(pts: Points, cam: CameraModel) -> Projection:
    """
    Project points into a pinhole camera.

    A hit needs positive depth and a pixel inside [0, width) x [0, height).
    """
    pc = cam.extrinsics.apply(_xyz(pts))
    z = pc[:, 2]
    ahead = z > 0
    safe_z = np.where(ahead, z, 1.0)
    u = cam.fx * pc[:, 0] / safe_z + cam.cx
    v = cam.fy * pc[:, 1] / safe_z + cam.cy
    valid = ahead & (u >= 0) & (u < cam.width) & (v >= 0) & (v < cam.height)
    uv = np.where(valid[:, None], np.stack([u, v], axis=1), 0.0)
    return Projection(uv, z, valid)


def unproject(u, v, depth, cam: CameraModel) -> np.ndarray:
    """Camera-frame point(s) for pixel (u, v) at the given depth."""
    u, v, depth = (np.asarray(a, dtype=np.float64) for a in (u, v, depth))
    x = (u - cam.cx) * depth / cam.fx
    y = (v - cam.cy) * depth / cam.fy
    return np.stack(np.broadcast_arrays(x, y, depth), axis=-1)


def _grid_sample(values: np.ndarray, positions: np.ndarray) -> Samples:
    """Multilinear interpolation of a (C, *dims) array at continuous indices."""
    dims = np.asarray(values.shape[1:], dtype=np.int64)
    k = len(dims)
    positions = np.asarray(positions, dtype=np.float64)
    lead = positions.shape[:-1]
    p = positions.reshape(-1, k)
    inside = np.all(np.isfinite(p), axis=1)
    inside &= np.all((p >= 0) & (p <= dims - 1), axis=1)
    p = np.where(inside[:, None], p, 0.0)

    lo = np.minimum(np.floor(p).astype(np.int64), np.maximum(dims - 2, 0))
    frac = p - lo
    flat = values.reshape(values.shape[0], -1)
    out = np.zeros((len(p), values.shape[0]))
    for corner in itertools.product((0, 1), repeat=k):
        corner = np.asarray(corner)
        idx = np.minimum(lo + corner, dims - 1)
        weight = np.prod(np.where(corner == 1, frac, 1.0 - frac), axis=1)
        lin = np.ravel_multi_index(tuple(idx.T), tuple(dims))
        out += weight[:, None] * flat[:, lin].T
    out[~inside] = 0.0
    return Samples(out.reshape(*lead, values.shape[0]), ~inside.reshape(lead))


def trilinear_sample(vol: np.ndarray, positions: np.ndarray) -> Samples:
    """
    Sample a C x D0 x D1 x D2 volume at (..., 3) continuous indices.

    Integer coordinates hit cell centers exactly. Positions outside
    [0, D-1] on any axis give the zero vector and set the out-of-bounds flag.
    """
    return _grid_sample(np.asarray(vol, dtype=np.float64), positions)


def bilinear_sample(plane: np.ndarray, positions: np.ndarray) -> Samples:
    """2D analogue of trilinear_sample for a C x H x W plane at (..., 2) positions."""
    return _grid_sample(np.asarray(plane, dtype=np.float64), positions)
