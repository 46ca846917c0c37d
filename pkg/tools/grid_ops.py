"""
Grid Ops Tool: world/voxel index arithmetic, voxelization and the
height/channel reshapes between feature volumes and BEV planes.
"""

from typing import NamedTuple, Optional

import numpy as np

from models.errors import ShapeError
from models.geometry import LabeledPointCloud
from models.grid import FREE, UNKNOWN, GridSpec, VoxelGrid, check_plane, check_volume


class Voxelization(NamedTuple):
    grid: VoxelGrid
    # linear voxel index -> ascending point indices inside that voxel
    members: dict[int, np.ndarray]


def points_to_voxels(xyz: np.ndarray, spec: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """
    Integer (ix, iy, iz) per point and a mask of points inside the half-open grid box.

    Indices of points outside the box are meaningless and must be masked by the caller.
    """
    xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
    mins, maxs = spec.mins, spec.maxs
    valid = np.all((xyz >= mins) & (xyz < maxs), axis=1)
    ijk = np.floor((xyz - mins) / spec.voxel_size).astype(np.int64)
    # x just below max can round up to the next cell
    ijk = np.clip(ijk, 0, np.asarray(spec.dims) - 1)
    return ijk, valid


def world_to_voxel(p, spec: GridSpec) -> Optional[tuple[int, int, int]]:
    """Voxel index of a metric point, or None when it lies outside [min, max)."""
    ijk, valid = points_to_voxels(np.asarray(p, dtype=np.float64).reshape(1, 3), spec)
    if not valid[0]:
        return None
    return tuple(int(i) for i in ijk[0])


def voxelize_points(
    pts: LabeledPointCloud, spec: GridSpec, num_classes: Optional[int] = None
) -> Voxelization:
    """
    Occupancy by point presence, label by majority vote (smallest id on ties).

    Points whose class is unknown (255) or >= num_classes still occupy their voxel
    in `members` but do not vote; a voxel with no voting point keeps label 0.
    """
    labels = pts.class_ids
    votable = labels != UNKNOWN
    if num_classes is None:
        num_classes = int(labels[votable].max()) + 1 if votable.any() else 1
    votable &= labels < num_classes

    ijk, valid = points_to_voxels(pts.xyz, spec)
    idx = np.flatnonzero(valid)
    if idx.size == 0:
        return Voxelization(VoxelGrid.free(spec, num_classes), {})

    lin = spec.linear_index(ijk[idx, 0], ijk[idx, 1], ijk[idx, 2])
    order = np.lexsort((idx, lin))
    lin_sorted, pts_sorted = lin[order], idx[order]
    occupied, starts = np.unique(lin_sorted, return_index=True)
    members = dict(zip(occupied.tolist(), np.split(pts_sorted, starts[1:])))

    out = np.full(spec.num_voxels, FREE, dtype=np.uint8)
    vote = votable[idx]
    if vote.any():
        v_lin, v_lab = lin[vote], labels[idx][vote]
        pairs, counts = np.unique(np.stack([v_lin, v_lab], axis=1), axis=0, return_counts=True)
        # per voxel: highest count first, then smallest label
        best = np.lexsort((pairs[:, 1], -counts, pairs[:, 0]))
        ranked = pairs[best]
        _, first = np.unique(ranked[:, 0], return_index=True)
        winners = ranked[first]
        out[winners[:, 0]] = winners[:, 1]
    return Voxelization(VoxelGrid(spec, out, num_classes), members)


def voxel_centers(spec: GridSpec, linear: np.ndarray) -> np.ndarray:
    """Metric centers of voxels given by linear index, shape (N, 3)."""
    ix, iy, iz = spec.unravel(np.asarray(linear, dtype=np.int64))
    return spec.voxel_center(ix, iy, iz).reshape(-1, 3)


def volume_centers(spec: GridSpec) -> np.ndarray:
    """Metric voxel centers laid out as a volume: shape (H, W, Z, 3) = (NY, NX, NZ, 3)."""
    nx, ny, nz = spec.dims
    iy, ix, iz = np.meshgrid(np.arange(ny), np.arange(nx), np.arange(nz), indexing="ij")
    return spec.voxel_center(ix, iy, iz)


def meters_to_volume_index(xyz: np.ndarray, spec: GridSpec) -> np.ndarray:
    """Continuous (h, w, z) volume coordinates; integers sit on cell centers."""
    xyz = np.asarray(xyz, dtype=np.float64)
    rel = (xyz - spec.mins) / spec.voxel_size - 0.5
    return np.stack([rel[..., 1], rel[..., 0], rel[..., 2]], axis=-1)


def bev_reference_points(height: int, width: int) -> np.ndarray:
    """Every BEV cell center as continuous (h, w) coordinates, shape (H, W, 2)."""
    hh, ww = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    return np.stack([hh, ww], axis=-1).astype(np.float64)


def grid_from_volume_labels(labels_hwz: np.ndarray, spec: GridSpec, num_classes: int) -> VoxelGrid:
    """VoxelGrid from an (H, W, Z) label volume laid over `spec`."""
    if labels_hwz.shape != spec.volume_shape:
        raise ShapeError(f"label volume {labels_hwz.shape} does not match grid {spec.volume_shape}")
    return VoxelGrid.from_volume(spec, np.transpose(labels_hwz, (1, 0, 2)), num_classes)


def h2c(v: np.ndarray) -> np.ndarray:
    """C x H x W x Z volume -> (C*Z) x H x W plane, output channel c*Z + z."""
    v = check_volume(v, "h2c")
    c, h, w, z = v.shape
    return np.ascontiguousarray(v.transpose(0, 3, 1, 2)).reshape(c * z, h, w)


def c2h(p: np.ndarray, z: int) -> np.ndarray:
    """Exact inverse of h2c."""
    p = check_plane(p, "c2h")
    cz, h, w = p.shape
    if z < 1 or cz % z:
        raise ShapeError(f"bad C2H shape: {cz} channels cannot split into Z={z}")
    return np.ascontiguousarray(p.reshape(cz // z, z, h, w).transpose(0, 2, 3, 1))
