"""
Tests for models/grid.py and tools/grid_ops.py: index arithmetic, voxelization
and the BEV reshapes.
"""

import numpy as np
import pytest
from hypothesis import given, settings as hsettings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from models.errors import GridError, ShapeError
from models.geometry import LabeledPointCloud
from models.grid import FREE, GridSpec, VoxelGrid
from tools.grid_ops import (
    bev_reference_points,
    c2h,
    grid_from_volume_labels,
    h2c,
    meters_to_volume_index,
    points_to_voxels,
    volume_centers,
    voxelize_points,
    world_to_voxel,
)


def _cloud(xyz, labels=None):
    attrs = {} if labels is None else {"class": np.asarray(labels, dtype=np.float64)}
    return LabeledPointCloud(np.asarray(xyz, dtype=np.float64).reshape(-1, 3), attrs)


def _brute_force_labels(xyz, labels, spec, num_classes):
    """Per-voxel majority vote by explicit loops over points."""
    nx, ny, nz = spec.dims
    votes = {}
    for p, lab in zip(xyz, labels):
        if not all(spec.mins[a] <= p[a] < spec.maxs[a] for a in range(3)):
            continue
        ix, iy, iz = (min(int(np.floor((p[a] - spec.mins[a]) / spec.voxel_size)), d - 1)
                      for a, d in enumerate((nx, ny, nz)))
        lin = (ix * ny + iy) * nz + iz
        votes.setdefault(lin, {})
        if lab < num_classes:
            votes[lin][lab] = votes[lin].get(lab, 0) + 1
    out = np.zeros(spec.num_voxels, dtype=np.uint8)
    for lin, counts in votes.items():
        if counts:
            best = max(counts.values())
            out[lin] = min(c for c, n in counts.items() if n == best)
    return out


# ── GridSpec ────────────────────────────────────────────────────────────────

def test_presets_have_published_dims():
    assert GridSpec.preset("omnihd").dims == (240, 160, 16)
    assert GridSpec.preset("nuscenes").dims == (200, 200, 16)
    assert GridSpec.preset("desk").volume_shape == (16, 24, 4)


def test_unknown_preset_raises():
    with pytest.raises(GridError):
        GridSpec.preset("kitti")


def test_range_must_be_multiple_of_voxel_size():
    with pytest.raises(ValueError):
        GridSpec(x_range=(0.0, 1.25), y_range=(0.0, 1.0), z_range=(0.0, 1.0), voxel_size=0.5)


def test_linear_layout_is_x_major(tiny_grid):
    # dims (6, 5, 2): ((ix * NY) + iy) * NZ + iz
    assert tiny_grid.linear_index(1, 2, 1) == (1 * 5 + 2) * 2 + 1
    ix, iy, iz = tiny_grid.unravel(25)
    assert (int(ix), int(iy), int(iz)) == (2, 2, 1)


def test_voxel_grid_rejects_out_of_range_label(tiny_grid):
    labels = np.zeros(tiny_grid.num_voxels, dtype=np.uint8)
    labels[3] = 7
    with pytest.raises(GridError):
        VoxelGrid(tiny_grid, labels, num_classes=4)


# ── world_to_voxel ──────────────────────────────────────────────────────────

def test_world_to_voxel_hand_evaluated(omnihd):
    assert world_to_voxel((0.26, -39.8, 4.9), omnihd) == (120, 0, 15)


def test_world_to_voxel_upper_bound_is_exclusive(omnihd):
    assert world_to_voxel((60.0, 0.0, 0.0), omnihd) is None
    assert world_to_voxel((-60.0, -40.0, -3.0), omnihd) == (0, 0, 0)


def test_every_omnihd_voxel_center_maps_back_to_itself(omnihd):
    nx, ny, nz = omnihd.dims
    ix, iy, iz = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    centers = omnihd.voxel_center(ix.ravel(), iy.ravel(), iz.ravel())
    ijk, valid = points_to_voxels(centers, omnihd)
    assert valid.all()
    np.testing.assert_array_equal(ijk, np.column_stack([ix.ravel(), iy.ravel(), iz.ravel()]))


# ── voxelize_points ─────────────────────────────────────────────────────────

def test_single_point_at_center_occupies_one_voxel(omnihd):
    center = omnihd.voxel_center(10, 20, 3)
    vox = voxelize_points(_cloud(center, [3]), omnihd, num_classes=12)
    assert np.count_nonzero(vox.grid.occupied) == 1
    assert vox.grid.labels[omnihd.linear_index(10, 20, 3)] == 3
    assert list(vox.members) == [int(omnihd.linear_index(10, 20, 3))]


def test_majority_vote_ties_go_to_smallest_class(tiny_grid):
    pts = [(0.2, 0.2, 0.2), (0.8, 0.8, 0.8), (0.5, 0.5, 0.5)]
    vox = voxelize_points(_cloud(pts, [5, 2, 5]), tiny_grid, num_classes=6)
    assert vox.grid.labels[0] == 5
    vox = voxelize_points(_cloud(pts[:2], [5, 2]), tiny_grid, num_classes=6)
    assert vox.grid.labels[0] == 2


def test_unknown_points_occupy_members_but_do_not_vote(tiny_grid):
    vox = voxelize_points(_cloud([(0.5, 0.5, 0.5)], [255]), tiny_grid, num_classes=4)
    assert vox.grid.labels[0] == FREE
    np.testing.assert_array_equal(vox.members[0], [0])


def test_empty_cloud_gives_free_grid(tiny_grid):
    vox = voxelize_points(LabeledPointCloud.empty(["class"]), tiny_grid, num_classes=4)
    assert not vox.grid.occupied.any()
    assert vox.members == {}


def test_members_are_ascending_point_indices(tiny_grid):
    pts = [(0.5, 0.5, 0.5), (3.5, 1.5, 0.5), (0.1, 0.9, 0.3), (7.0, 0.0, 0.0)]
    vox = voxelize_points(_cloud(pts, [1, 2, 1, 3]), tiny_grid, num_classes=4)
    np.testing.assert_array_equal(vox.members[0], [0, 2])
    assert 3 not in np.concatenate(list(vox.members.values()))


def test_voxelization_matches_brute_force_oracle(desk, rng):
    for _ in range(100):
        n = int(rng.integers(1, 300))
        xyz = rng.uniform(desk.mins - 1.0, desk.maxs + 1.0, size=(n, 3))
        labels = rng.integers(1, 7, size=n)
        vox = voxelize_points(_cloud(xyz, labels), desk, num_classes=6)
        np.testing.assert_array_equal(vox.grid.labels, _brute_force_labels(xyz, labels, desk, 6))


# ── volume layout ───────────────────────────────────────────────────────────

def test_volume_centers_follow_h_w_z_axes(tiny_grid):
    centers = volume_centers(tiny_grid)
    assert centers.shape == (5, 6, 2, 3)
    np.testing.assert_allclose(centers[2, 4, 1], tiny_grid.voxel_center(4, 2, 1))


def test_voxel_center_is_integer_volume_index(tiny_grid):
    index = meters_to_volume_index(tiny_grid.voxel_center(4, 2, 1), tiny_grid)
    np.testing.assert_allclose(index, (2.0, 4.0, 1.0))


def test_bev_reference_points_are_cell_indices():
    ref = bev_reference_points(3, 4)
    assert ref.shape == (3, 4, 2)
    np.testing.assert_array_equal(ref[2, 1], (2.0, 1.0))


def test_grid_from_volume_labels_transposes_h_and_w(tiny_grid):
    labels = np.zeros(tiny_grid.volume_shape, dtype=np.uint8)
    labels[3, 1, 0] = 2  # h = iy = 3, w = ix = 1
    grid = grid_from_volume_labels(labels, tiny_grid, 4)
    assert grid.labels[tiny_grid.linear_index(1, 3, 0)] == 2


# ── H2C / C2H ───────────────────────────────────────────────────────────────

def test_h2c_channel_order(rng):
    v = rng.normal(size=(3, 4, 5, 2))
    p = h2c(v)
    assert p.shape == (6, 4, 5)
    np.testing.assert_array_equal(p[1 * 2 + 1], v[1, :, :, 1])


def test_c2h_rejects_indivisible_channels():
    with pytest.raises(ShapeError, match="bad C2H shape"):
        c2h(np.zeros((5, 2, 2)), 2)


@hsettings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(*[st.integers(1, 4)] * 4), elements=st.floats(-1e3, 1e3)))
def test_c2h_inverts_h2c(v):
    np.testing.assert_array_equal(c2h(h2c(v), v.shape[3]), v)
