"""
Tests for the pseudo-label stages (agents/) and the LangGraph workflow.
"""

import time

import numpy as np
import pytest

from config.run_config import PseudoLabelParams, RunConfig, load_run_config
from config.settings import settings
from models.errors import GridError, ShapeError
from models.geometry import LabeledPointCloud, RigidPose
from models.grid import FREE, GridSpec
from models.scene import Box3D, DrivableRegion, ObjectPoints, Rect, SemanticMask
from agents.aggregator import aggregate_dynamic, aggregate_static
from agents.noise_filter import filter_noise, noise_mask
from agents.occupancy import generate_occupancy, nearest_points, staged_nearest_neighbor
from agents.region import drivable_region
from agents.semantics import assign_semantics
from agents.separator import extract_objects
from graph.workflow import generate_pseudo_labels, run_pseudo_labels
from tools.fixtures import CAR, down_camera, make_fixture
from tools.geometry import project_to_image
from tools.grid_ops import voxel_centers, voxelize_points


def _box(track, center, size=(4.0, 2.0, 2.0), yaw=0.0, class_id=CAR, frame=0):
    return Box3D(id=track, track_id=track, class_id=class_id, center=center, size=size, yaw=yaw, frame_id=frame)


def _labeled(xyz, classes):
    return LabeledPointCloud(np.asarray(xyz, dtype=np.float64).reshape(-1, 3),
                             {"class": np.asarray(classes, dtype=np.float64)})


def _agreement(pred, expected):
    """Fraction of voxels occupied in either grid whose labels match."""
    union = pred.occupied | expected.occupied
    return float(np.mean(pred.labels[union] == expected.labels[union]))


def _staged_oracle(members, dyn, static, spec, num_classes, radius):
    """Exhaustive per-voxel search over every point."""
    labels = np.zeros(spec.num_voxels, dtype=np.uint8)
    n_static = len(static)
    st_cls = static.class_ids
    usable = (st_cls != 255) & (st_cls < num_classes)
    for v, idx in members.items():
        center = voxel_centers(spec, np.array([v]))[0]
        if (idx >= n_static).any():
            d2 = ((dyn.xyz - center) ** 2).sum(axis=1)
            labels[v] = dyn.class_ids[int(np.argmin(d2))]
        elif usable.any():
            d2 = np.where(usable, ((static.xyz - center) ** 2).sum(axis=1), np.inf)
            j = int(np.argmin(d2))
            if d2[j] <= radius * radius:
                labels[v] = st_cls[j]
    return labels


# ── separation ──────────────────────────────────────────────────────────────

def test_overlapping_boxes_give_points_to_the_nearest_center():
    boxes = [_box(1, (0.0, 0.0, 0.0)), _box(2, (1.5, 0.0, 0.0))]
    cloud = LabeledPointCloud(np.array([
        [0.5, 0.0, 0.0], [1.0, 0.0, 0.0], [0.75, 0.0, 0.0], [10.0, 0.0, 0.0],
    ]))
    objects, static = extract_objects(cloud, boxes)
    np.testing.assert_allclose(objects[0].points.xyz[:, 0], [0.5, 0.75])
    np.testing.assert_allclose(objects[1].points.xyz[:, 0], [1.0])
    np.testing.assert_array_equal(objects[1].points.track_ids, [2])
    np.testing.assert_array_equal(objects[0].points.confidences, [1.0, 1.0])
    np.testing.assert_allclose(static.xyz, [[10.0, 0.0, 0.0]])


def _owner_oracle(xyz, boxes):
    """Per point: boxes whose rotated frame holds it, nearest center wins, lower index on ties."""
    owner = np.full(len(xyz), -1)
    for i, p in enumerate(xyz):
        best = np.inf
        for b, box in enumerate(boxes):
            d = p - np.asarray(box.center)
            c, s = np.cos(box.yaw), np.sin(box.yaw)
            local = np.array([c * d[0] + s * d[1], -s * d[0] + c * d[1], d[2]])
            if np.all(np.abs(local) <= np.asarray(box.size) / 2.0):
                d2 = float(d @ d)
                if d2 < best:
                    best, owner[i] = d2, b
    return owner


def test_extract_objects_matches_per_point_search(rng):
    boxes = [
        _box(t, tuple(rng.uniform((-8, -8, -1), (8, 8, 1))), size=tuple(rng.uniform(4.0, 7.0, 3)),
             yaw=float(rng.uniform(-np.pi, np.pi)))
        for t in range(1, 6)
    ]
    cloud = LabeledPointCloud(rng.uniform((-10, -10, -2), (10, 10, 2), size=(500, 3)))
    objects, static = extract_objects(cloud, boxes)
    owner = _owner_oracle(cloud.xyz, boxes)
    assert (owner >= 0).sum() > 20
    for b, obj in enumerate(objects):
        np.testing.assert_array_equal(obj.points.xyz, cloud.xyz[owner == b])
        np.testing.assert_array_equal(obj.points.track_ids, b + 1)
    np.testing.assert_array_equal(static.xyz, cloud.xyz[owner < 0])


def test_no_boxes_leaves_every_point_static(rng):
    cloud = LabeledPointCloud(rng.normal(size=(20, 3)))
    objects, static = extract_objects(cloud, [])
    assert objects == [] and len(static) == 20


# ── noise filter ────────────────────────────────────────────────────────────

@pytest.fixture(scope="module")
def rain():
    return make_fixture("rain-noise")


def test_rain_noise_is_removed_and_structure_kept(rain):
    params = PseudoLabelParams()
    cloud = rain.scene.lidar[0]
    region = drivable_region(RigidPose.identity(), [], params)
    removed = noise_mask(cloud, region, params)
    assert np.mean(removed[rain.noise]) >= 0.95
    assert np.mean(~removed[~rain.noise]) >= 0.99


def test_filter_noise_keeps_the_unmasked_points(rain):
    params = PseudoLabelParams()
    cloud = rain.scene.lidar[0]
    region = drivable_region(RigidPose.identity(), [], params)
    removed = noise_mask(cloud, region, params)
    kept = filter_noise(cloud, region, params)
    np.testing.assert_array_equal(kept.xyz, cloud.xyz[~removed])
    np.testing.assert_array_equal(kept.class_ids, cloud.class_ids[~removed])


def test_points_outside_the_region_are_never_removed(rain):
    params = PseudoLabelParams()
    far = DrivableRegion((Rect(500.0, 500.0, 1.0, 1.0, 0.0),))
    assert not noise_mask(rain.scene.lidar[0], far, params).any()


def test_region_covers_box_footprints():
    region = drivable_region(RigidPose.identity(), [_box(1, (50.0, 0.0, 0.0))], PseudoLabelParams())
    np.testing.assert_array_equal(region.contains(np.array([[51.0, 0.0], [55.0, 0.0], [0.0, 9.0]])),
                                  [True, False, True])


# ── semantics ───────────────────────────────────────────────────────────────

def test_semantics_pick_the_most_confident_camera(rng):
    cams = [down_camera("b", 20.0, 64, 50.0), down_camera("a", 25.0, 64, 60.0)]
    masks = {
        cam.name: SemanticMask(cam.name, rng.integers(0, 12, (64, 64)), rng.uniform(0, 1, (64, 64)))
        for cam in cams
    }
    cloud = LabeledPointCloud(rng.uniform((-20, -20, -2), (20, 20, 2), size=(300, 3)))
    labeled = assign_semantics(cloud, masks, cams)

    for i, p in enumerate(cloud.xyz):
        hits = []
        for cam in cams:
            proj = project_to_image(p[None], cam)
            if proj.valid[0]:
                u, v = (int(np.floor(c)) for c in proj.uv[0])
                mask = masks[cam.name]
                hits.append((-mask.confidences[v, u], proj.depth[0], cam.name, int(mask.classes[v, u])))
        if hits:
            best = min(hits)
            assert labeled.class_ids[i] == best[3]
            assert labeled.confidences[i] == -best[0]
        else:
            assert labeled.class_ids[i] == 255
            assert labeled.confidences[i] == 0.0


def test_mask_must_match_camera_size():
    cam = down_camera("top", 20.0, 64, 50.0)
    mask = SemanticMask("top", np.zeros((32, 64)), np.zeros((32, 64)))
    with pytest.raises(ShapeError):
        assign_semantics(LabeledPointCloud(np.zeros((1, 3))), {"top": mask}, [cam])


# ── aggregation ─────────────────────────────────────────────────────────────

def test_dynamic_points_follow_the_target_box():
    first = _box(4, (0.0, 0.0, 0.0), frame=0)
    second = _box(4, (10.0, 0.0, 0.0), yaw=np.pi / 2, frame=1)
    objects = {
        0: [ObjectPoints(first, LabeledPointCloud(np.array([[1.0, 0.0, 0.0], [0.0, 0.5, 0.0]])))],
        1: [ObjectPoints(second, LabeledPointCloud(second.pose.apply(np.array([[0.0, 0.5, 0.0]]))))],
    }
    merged = aggregate_dynamic(objects, [0, 1])
    # (0, 0.5, 0) appears in both frames and is kept once
    assert len(merged) == 2
    expected = second.pose.apply(np.array([[1.0, 0.0, 0.0], [0.0, 0.5, 0.0]]))
    np.testing.assert_allclose(np.sort(merged.xyz, axis=0), np.sort(expected, axis=0), atol=1e-9)
    np.testing.assert_array_equal(merged.track_ids, [4, 4])
    np.testing.assert_array_equal(merged.class_ids, [CAR, CAR])


def test_half_visible_object_is_completed_from_both_frames(rng):
    size = (4.0, 2.0, 2.0)
    surface = rng.uniform(-1.0, 1.0, size=(80, 3)) * np.asarray(size) / 2.0
    front, back = surface[surface[:, 0] >= 0], surface[surface[:, 0] < 0]
    first = _box(5, (0.0, 0.0, 0.0), size=size, frame=0)
    second = _box(5, (6.0, 2.0, 0.0), size=size, yaw=0.8, frame=1)
    objects = {
        0: [ObjectPoints(first, LabeledPointCloud(first.pose.apply(front)))],
        1: [ObjectPoints(second, LabeledPointCloud(second.pose.apply(back)))],
    }
    merged = aggregate_dynamic(objects, [0, 1])
    assert len(merged) == len(surface)
    np.testing.assert_allclose(merged.xyz, second.pose.apply(np.concatenate([front, back])), atol=1e-9)
    assert second.contains(merged.xyz).all()


def test_tracks_missing_from_the_target_frame_are_skipped():
    objects = {0: [ObjectPoints(_box(9, (0.0, 0.0, 0.0)), LabeledPointCloud(np.zeros((3, 3))))], 1: []}
    assert len(aggregate_dynamic(objects, [0, 1])) == 0


def test_static_points_move_to_the_world_frame():
    clouds = [_labeled([[0.0, 0.0, 0.0]], [8]), _labeled([[0.0, 0.0, 0.0]], [9])]
    poses = [RigidPose.identity(), RigidPose.from_translation((2.0, 0.0, 0.0))]
    merged = aggregate_static(clouds, poses)
    np.testing.assert_allclose(merged.xyz, [[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    np.testing.assert_array_equal(merged.class_ids, [8, 9])
    with pytest.raises(ShapeError):
        aggregate_static(clouds, poses[:1])


# ── staged nearest-neighbor ─────────────────────────────────────────────────

def test_nearest_point_not_majority_labels_the_voxel(tiny_grid):
    static = _labeled([(0.1, 0.1, 0.1), (0.5, 0.5, 0.45), (0.9, 0.9, 0.9)], [8, 10, 8])
    vox = voxelize_points(static, tiny_grid, num_classes=12)
    assert vox.grid.labels[0] == 8  # majority
    grid = staged_nearest_neighbor(vox.members, LabeledPointCloud.empty(["class"]), static, tiny_grid, 12)
    assert grid.labels[0] == 10


def test_equidistant_dynamic_points_go_to_the_smaller_index(tiny_grid):
    for classes, expected in (([2, 3], 2), ([3, 2], 3)):
        dyn = _labeled([(0.5, 0.5, 0.0), (0.5, 0.5, 1.0)], classes)
        vox = voxelize_points(dyn, tiny_grid, num_classes=4)
        grid = staged_nearest_neighbor(vox.members, dyn, LabeledPointCloud.empty(["class"]), tiny_grid, 4)
        assert grid.labels[0] == expected


def test_dynamic_class_outside_table_rejected(tiny_grid):
    dyn = _labeled([(0.5, 0.5, 0.5)], [7])
    vox = voxelize_points(dyn, tiny_grid, num_classes=4)
    with pytest.raises(GridError):
        staged_nearest_neighbor(vox.members, dyn, LabeledPointCloud.empty(["class"]), tiny_grid, 4)


def test_nearest_points_respects_radius():
    pts = np.array([[0.0, 0.0, 0.0], [3.0, 0.0, 0.0]])
    np.testing.assert_array_equal(nearest_points(pts, np.array([[1.0, 0.0, 0.0], [10.0, 0.0, 0.0]]), 2.0),
                                  [0, -1])


def test_staged_matching_equals_exhaustive_search(rng):
    spec = GridSpec(x_range=(0.0, 10.0), y_range=(0.0, 10.0), z_range=(0.0, 2.0), voxel_size=0.5)
    elapsed = 0.0
    for _ in range(50):
        n_static = int(rng.integers(0, 1500))
        n_dyn = int(rng.integers(0, 500))
        st_cls = rng.integers(1, 12, n_static)
        st_cls[rng.uniform(size=n_static) < 0.1] = 255
        static = _labeled(rng.uniform((-0.5, -0.5, 0.0), (10.5, 10.5, 2.0), (n_static, 3)), st_cls)
        dyn = _labeled(rng.uniform((3.0, 3.0, 0.0), (6.0, 5.0, 1.5), (n_dyn, 3)), rng.integers(1, 12, n_dyn))
        radius = float(rng.choice([0.3, 0.75, 2.0]))

        merged = LabeledPointCloud.concat([static, dyn], fields=("class",))
        vox = voxelize_points(merged, spec, num_classes=12)
        start = time.perf_counter()
        grid = staged_nearest_neighbor(vox.members, dyn, static, spec, 12, radius)
        elapsed += time.perf_counter() - start
        np.testing.assert_array_equal(grid.labels, _staged_oracle(vox.members, dyn, static, spec, 12, radius))
    assert elapsed < 10.0


# ── workflow ────────────────────────────────────────────────────────────────

@pytest.fixture(scope="module")
def plane_and_car():
    fixture = make_fixture("plane+car")
    return fixture, run_pseudo_labels(fixture.scene, load_run_config())


def test_plane_and_car_matches_the_analytic_grid(plane_and_car):
    fixture, state = plane_and_car
    grid = state["occupancy"]
    assert _agreement(grid, fixture.expected) >= 0.99
    car_cells = fixture.expected.labels == CAR
    assert np.mean(grid.labels[car_cells] == CAR) >= 0.99


def test_workflow_reports_stage_counts(plane_and_car):
    _, state = plane_and_car
    counts = state["counts"]
    for key in ("frames", "extracted", "static", "filtered", "labeled", "dynamic", "aggregated", "voxelized"):
        assert key in counts
    assert counts["frames"] == 2
    assert counts["voxelized"] == int(np.count_nonzero(state["occupancy"].occupied))
    assert state["warnings"] == []


def test_labels_do_not_depend_on_thread_count(plane_and_car, monkeypatch):
    fixture, state = plane_and_car
    monkeypatch.setattr(settings, "threads", 4)
    again = generate_pseudo_labels(fixture.scene, load_run_config())
    np.testing.assert_array_equal(again.labels, state["occupancy"].labels)


def _dense_plane_and_car(total):
    """plane+car with jittered copies of its returns until the scene holds `total` points."""
    fixture = make_fixture("plane+car")
    rng = np.random.default_rng(5)
    per_frame = total // len(fixture.scene.frames)
    for frame in fixture.scene.frames:
        xyz = fixture.scene.lidar[frame].xyz
        extra = xyz[rng.integers(0, len(xyz), per_frame - len(xyz))]
        extra = extra + rng.uniform(-0.01, 0.01, size=extra.shape) * np.array([1.0, 1.0, 0.0])
        fixture.scene.lidar[frame] = LabeledPointCloud(np.concatenate([xyz, extra]))
    return fixture


def test_dense_scene_labels_quickly_and_repeatably():
    fixture = _dense_plane_and_car(100_000)
    assert sum(len(c) for c in fixture.scene.lidar.values()) == 100_000
    config = load_run_config()
    start = time.perf_counter()
    first = generate_pseudo_labels(fixture.scene, config)
    assert time.perf_counter() - start < 5.0
    np.testing.assert_array_equal(generate_pseudo_labels(fixture.scene, config).labels, first.labels)


def test_window_limits_frames():
    fixture = make_fixture("two-frame-motion")
    config = RunConfig(preset="desk", pseudolabel=PseudoLabelParams(window=2))
    state = run_pseudo_labels(fixture.scene, config)
    assert state["frames"] == [1, 2]
    assert state["occupancy"].spec == fixture.grid


def test_track_absent_from_current_frame_warns():
    fixture = make_fixture("two-frame-motion")
    fixture.scene.boxes[2] = []
    state = run_pseudo_labels(fixture.scene, RunConfig(preset="desk"))
    assert any("[3]" in w and "frame 2" in w for w in state["warnings"])


def test_missing_pose_is_a_shape_error():
    fixture = make_fixture("rain-noise")
    fixture.scene.poses.clear()
    with pytest.raises(ShapeError, match="no pose"):
        run_pseudo_labels(fixture.scene, load_run_config())


def test_generate_occupancy_labels_in_the_current_frame(tiny_grid):
    static_world = _labeled([(10.5, 0.5, 0.5), (2.0, 0.5, 0.5)], [8, 9])
    dynamic = _labeled([(3.5, 2.5, 0.5)], [1])
    grid = generate_occupancy(static_world, dynamic, RigidPose.from_translation((10.0, 0.0, 0.0)), tiny_grid, 12)
    assert grid.labels[0] == 8
    assert grid.labels[tiny_grid.linear_index(3, 2, 0)] == 1
    assert np.count_nonzero(grid.labels) == 2


def test_unlabeled_voxels_stay_free(tiny_grid):
    static = _labeled([(0.5, 0.5, 0.5)], [255])
    vox = voxelize_points(static, tiny_grid, num_classes=4)
    grid = staged_nearest_neighbor(vox.members, LabeledPointCloud.empty(["class"]), static, tiny_grid, 4)
    assert grid.labels[0] == FREE
