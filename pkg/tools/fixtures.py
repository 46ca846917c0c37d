"""
Synthetic scene fixtures: analytic scenes in the scene directory layout.

    plane+car         ground plane with a parked car, two frames, omnihd grid,
                      plus the analytically expected label grid
    rain-noise        one frame of ground, a wall and hovering/airborne clutter
    two-frame-motion  a car driving past a moving ego over three frames on the
                      desk grid, with radar sweeps for the fusion dataflow
"""

import os
from typing import Callable, NamedTuple, Optional

import numpy as np

from models.errors import ConfigError
from models.geometry import CameraModel, LabeledPointCloud, RigidPose
from models.grid import FREE, GridSpec, VoxelGrid
from models.scene import Box3D, SceneData, SemanticMask
from tools.formats import write_grid
from tools.grid_ops import points_to_voxels
from tools.scene_io import write_scene

# Class ids of the omnihd table
CAR, DRIVABLE, SIDEWALK = 1, 8, 9
OMNIHD_CLASSES = 12

GROUND_Z = -1.85
SIDEWALK_Y = 10.5
MASK_CONF = 0.9

# camera frame: x_cam = -y_ego, y_cam = -x_ego, z_cam = -z_ego
DOWN = np.array([[0.0, -1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, -1.0]])


class Fixture(NamedTuple):
    scene: SceneData
    grid: GridSpec
    expected: Optional[VoxelGrid] = None
    noise: Optional[np.ndarray] = None  # bool per LiDAR point of the current frame


def down_camera(name: str, height: float, size: int, focal: float) -> CameraModel:
    """Square pinhole camera `height` meters above the ego origin, looking straight down."""
    k = np.array([[focal, 0.0, size / 2.0], [0.0, focal, size / 2.0], [0.0, 0.0, 1.0]])
    ego_to_cam = RigidPose.from_rt(DOWN, -DOWN @ np.array([0.0, 0.0, height]))
    return CameraModel(name, size, size, k, ego_to_cam)


def ground_under_pixels(cam: CameraModel, ground_z: float) -> np.ndarray:
    """Ego-frame point on the plane z = ground_z seen by every pixel center, shape (H, W, 3)."""
    cam_height = cam.extrinsics.inverse().translation[2]
    depth = cam_height - ground_z
    v, u = np.meshgrid(np.arange(cam.height) + 0.5, np.arange(cam.width) + 0.5, indexing="ij")
    pc = np.stack([(u - cam.cx) * depth / cam.fx, (v - cam.cy) * depth / cam.fy, np.full_like(u, depth)], axis=-1)
    return cam.extrinsics.inverse().apply(pc.reshape(-1, 3)).reshape(cam.height, cam.width, 3)


def plane(x_range, y_range, z: float, spacing: float) -> np.ndarray:
    xs = np.arange(x_range[0], x_range[1] + spacing / 2, spacing)
    ys = np.arange(y_range[0], y_range[1] + spacing / 2, spacing)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, z)])


def box_shell(size, spacing: float, inset: float = 0.98) -> np.ndarray:
    """Points on the six faces of a box-local cuboid, pulled slightly inside its extents."""
    half = np.asarray(size, dtype=np.float64) / 2.0 * inset
    axes = [np.linspace(-h, h, max(2, int(np.ceil(2 * h / spacing)) + 1)) for h in half]
    faces = []
    for a in range(3):
        b, c = [i for i in range(3) if i != a]
        gb, gc = np.meshgrid(axes[b], axes[c], indexing="ij")
        for sign in (-1.0, 1.0):
            face = np.zeros((gb.size, 3))
            face[:, a] = sign * half[a]
            face[:, b], face[:, c] = gb.ravel(), gc.ravel()
            faces.append(face)
    return np.unique(np.concatenate(faces), axis=0)


def _cloud(xyz: np.ndarray) -> LabeledPointCloud:
    return LabeledPointCloud(xyz)


# ── plane+car ───────────────────────────────────────────────────────────────

def plane_and_car(seed: int = 0) -> Fixture:
    """
    Two frames, ego moving +1 m in x; a parked car (track 7) and a flat road.

    The expected grid labels car cells 1, ground cells 9 beyond |y| > 10.5 m and 8 elsewhere.
    """
    rng = np.random.default_rng(seed)
    spec = GridSpec.preset("omnihd")
    cam = down_camera("top", 30.0, 400, 250.0)
    frames = [0, 1]
    ego = {f: RigidPose.from_translation((float(f), 0.0, 0.0)) for f in frames}

    ground_world = plane((-19.0, 21.0), (-15.0, 15.0), GROUND_Z, 0.25)
    ground_world[:, 2] += np.clip(rng.normal(0.0, 0.002, len(ground_world)), -0.01, 0.01)
    car_world = RigidPose.from_yaw(0.3, (9.0, 3.0, -0.9))
    car_size = (4.5, 1.9, 1.8)
    shell = box_shell(car_size, 0.2)

    pixels = ground_under_pixels(cam, GROUND_Z)
    classes = np.where(np.abs(pixels[..., 1]) >= SIDEWALK_Y, SIDEWALK, DRIVABLE)
    mask = SemanticMask(cam.name, classes, np.full(classes.shape, MASK_CONF))

    scene = SceneData(frames=frames, poses=ego, cameras=[cam])
    for f in frames:
        to_local = ego[f].inverse()
        car_local = to_local @ car_world
        box = Box3D(
            id=f, track_id=7, class_id=CAR, center=tuple(car_local.translation.tolist()),
            size=car_size, yaw=car_local.yaw, frame_id=f,
        )
        points = np.concatenate([to_local.apply(ground_world), car_local.apply(shell)])
        scene.boxes[f] = [box]
        scene.lidar[f] = _cloud(points)
        scene.masks[f] = {cam.name: mask}

    current = ego[frames[-1]].inverse()
    ground_now = current.apply(ground_world)
    car_now = (current @ car_world).apply(shell)
    labels = np.full(spec.num_voxels, FREE, dtype=np.uint8)
    ijk, valid = points_to_voxels(ground_now, spec)
    lin = spec.linear_index(ijk[valid, 0], ijk[valid, 1], ijk[valid, 2])
    center_y = spec.voxel_center(ijk[valid, 0], ijk[valid, 1], ijk[valid, 2])[:, 1]
    labels[lin] = np.where(np.abs(center_y) > SIDEWALK_Y, SIDEWALK, DRIVABLE)
    ijk, valid = points_to_voxels(car_now, spec)
    labels[spec.linear_index(ijk[valid, 0], ijk[valid, 1], ijk[valid, 2])] = CAR
    return Fixture(scene, spec, expected=VoxelGrid(spec, labels, OMNIHD_CLASSES))


# ── rain-noise ──────────────────────────────────────────────────────────────

def rain_noise(seed: int = 0) -> Fixture:
    """
    One frame: a 20 x 12 m ground patch, a wall 2.5 m past its edge, 50 points
    hovering 0.15 m over the ground and 20 isolated points 1.5 m up.
    """
    rng = np.random.default_rng(seed)
    spec = GridSpec.preset("omnihd")
    cam = down_camera("top", 30.0, 400, 250.0)

    ground = plane((-10.0, 10.0), (-6.0, 6.0), GROUND_Z, 0.25)
    wy, wz = np.meshgrid(np.arange(-4.0, 4.0 + 1e-9, 0.25), np.arange(GROUND_Z, 1.15 + 1e-9, 0.25), indexing="ij")
    wall = np.column_stack([np.full(wy.size, 12.5), wy.ravel(), wz.ravel()])

    # lattice sites at least 2 m apart, jittered
    lx, ly = np.meshgrid(np.linspace(-9.0, 9.0, 10), np.linspace(-5.0, 5.0, 5), indexing="ij")
    sites = np.column_stack([lx.ravel(), ly.ravel()]) + rng.uniform(-0.3, 0.3, (50, 2))
    hovering = np.column_stack([sites, np.full(50, GROUND_Z + 0.15)])
    airborne = np.column_stack([sites[::5] + 1.0, np.full(10, GROUND_Z + 1.5)])
    airborne = np.concatenate([airborne, airborne + (0.0, 0.0, 1.5)])

    points = np.concatenate([ground, wall, hovering, airborne])
    noise = np.zeros(len(points), dtype=bool)
    noise[len(ground) + len(wall):] = True

    classes = np.full((cam.height, cam.width), DRIVABLE)
    mask = SemanticMask(cam.name, classes, np.full(classes.shape, MASK_CONF))
    scene = SceneData(
        frames=[0], poses={0: RigidPose.identity()}, cameras=[cam],
        boxes={0: []}, lidar={0: _cloud(points)}, masks={0: {cam.name: mask}},
    )
    return Fixture(scene, spec, noise=noise)


# ── two-frame-motion ────────────────────────────────────────────────────────

def two_frame_motion(seed: int = 0, frames: int = 3) -> Fixture:
    """
    Desk-scale scene: ego advancing 1 m per frame while a car (track 3) drives
    +2.5 m per frame alongside; radar sees the car and a few static reflectors.
    """
    rng = np.random.default_rng(seed)
    spec = GridSpec.preset("desk")
    cam = down_camera("top", 20.0, 256, 100.0)
    ground_z = -1.6
    ids = list(range(frames))
    ego = {f: RigidPose.from_translation((float(f), 0.0, 0.0)) for f in ids}

    ground_world = plane((-11.0, 13.0), (-7.5, 7.5), ground_z, 0.5)
    reflectors = np.column_stack([
        rng.uniform(-10.0, 12.0, 20), rng.uniform(-7.0, 7.0, 20), rng.uniform(-1.0, 1.0, 20),
    ])
    car_size = (4.0, 1.8, 1.5)
    shell = box_shell(car_size, 0.25)
    speed = 2.5

    scene = SceneData(frames=ids, poses=ego, cameras=[cam])
    pixels = ground_under_pixels(cam, ground_z).reshape(-1, 3)
    for f in ids:
        to_local = ego[f].inverse()
        car_local = to_local @ RigidPose.from_translation((-4.0 + speed * f, 2.0, -0.8))
        box = Box3D(
            id=f, track_id=3, class_id=CAR, center=tuple(car_local.translation.tolist()),
            size=car_size, yaw=0.0, frame_id=f,
        )
        scene.boxes[f] = [box]
        scene.lidar[f] = _cloud(np.concatenate([to_local.apply(ground_world), car_local.apply(shell)]))

        flat_box = box.model_copy(update={"size": (car_size[0], car_size[1], 100.0)})
        classes = np.where(flat_box.contains(pixels), CAR, DRIVABLE).reshape(cam.height, cam.width)
        scene.masks[f] = {cam.name: SemanticMask(cam.name, classes, np.full(classes.shape, MASK_CONF))}

        hits = car_local.apply(shell[rng.choice(len(shell), 8, replace=False)])
        radar_xyz = np.concatenate([hits, to_local.apply(reflectors)])
        n_car = len(hits)
        scene.radar[f] = LabeledPointCloud(radar_xyz, {
            "vx": np.r_[np.full(n_car, speed - 1.0), np.full(len(reflectors), -1.0)],
            "vy": np.zeros(len(radar_xyz)),
            "amp": rng.uniform(0.2, 1.0, len(radar_xyz)),
            "snr": rng.uniform(5.0, 20.0, len(radar_xyz)),
            "t": np.zeros(len(radar_xyz)),
        })
    return Fixture(scene, spec)


FIXTURE_KINDS: dict[str, Callable[[int], Fixture]] = {
    "plane+car": plane_and_car,
    "rain-noise": rain_noise,
    "two-frame-motion": two_frame_motion,
}


def make_fixture(kind: str, seed: int = 0) -> Fixture:
    if kind not in FIXTURE_KINDS:
        raise ConfigError(f"unknown fixture kind '{kind}' (known: {', '.join(FIXTURE_KINDS)})")
    return FIXTURE_KINDS[kind](seed)


def write_fixture(kind: str, seed: int, out_dir: str) -> Fixture:
    """Write the scene directory, plus expected.mocg when the fixture has an analytic grid."""
    fixture = make_fixture(kind, seed)
    write_scene(fixture.scene, out_dir)
    if fixture.expected is not None:
        write_grid(os.path.join(out_dir, "expected.mocg"), fixture.expected)
    return fixture
