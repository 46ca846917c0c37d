"""
Scene directory reader/writer.

Layout:
    poses.json              [{frame_id, matrix: 16 numbers row-major}], chronological
    cameras.json            [{name, width, height, intrinsics: 9, extrinsics: 16}]
    boxes.json              [Box3D fields]
    lidar_<frame>.mopc      labeled LiDAR cloud per frame
    mask_<frame>_<cam>.mosm segmentation mask per frame and camera (optional)
    radar_<frame>.mopc      radar cloud per frame (optional)
"""

import os

import numpy as np
from pydantic import ValidationError

from models.errors import FormatError, GridError, ShapeError
from models.geometry import CameraModel, RigidPose
from models.scene import Box3D, SceneData
from tools.file_handler import load_document, save_to_json
from tools.formats import read_mask, read_points, write_mask, write_points

REQUIRED_FILES = ("poses.json", "cameras.json", "boxes.json")


def lidar_path(scene_dir: str, frame: int) -> str:
    return os.path.join(scene_dir, f"lidar_{frame}.mopc")


def radar_path(scene_dir: str, frame: int) -> str:
    return os.path.join(scene_dir, f"radar_{frame}.mopc")


def mask_path(scene_dir: str, frame: int, camera: str) -> str:
    return os.path.join(scene_dir, f"mask_{frame}_{camera}.mosm")


def _list(path: str) -> list:
    data = load_document(path)
    if not isinstance(data, list):
        raise FormatError("expected a JSON array", path)
    return data


def _matrix(values, size: int, path: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size != size * size:
        raise FormatError(f"expected {size * size} matrix entries, got {arr.size}", path)
    return arr.reshape(size, size)


def load_poses(path: str) -> tuple[list[int], dict[int, RigidPose]]:
    frames, poses = [], {}
    try:
        for entry in _list(path):
            frame = int(entry["frame_id"])
            if frame in poses:
                raise FormatError(f"duplicate frame_id {frame}", path)
            frames.append(frame)
            poses[frame] = RigidPose(_matrix(entry["matrix"], 4, path))
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"bad pose entry ({e})", path) from None
    return frames, poses


def load_cameras(path: str) -> list[CameraModel]:
    cams = []
    try:
        for entry in _list(path):
            cams.append(CameraModel(
                name=str(entry["name"]),
                width=int(entry["width"]),
                height=int(entry["height"]),
                intrinsics=_matrix(entry["intrinsics"], 3, path),
                extrinsics=RigidPose(_matrix(entry["extrinsics"], 4, path)),
            ))
    except (KeyError, TypeError, GridError, ShapeError) as e:
        raise FormatError(f"bad camera entry ({e})", path) from None
    return cams


def load_boxes(path: str) -> list[Box3D]:
    try:
        return [Box3D.model_validate(entry) for entry in _list(path)]
    except ValidationError as e:
        raise FormatError(f"bad box entry ({e.errors()[0]['msg']})", path) from None


def load_scene(scene_dir: str) -> SceneData:
    """
    Load a scene directory; the first missing required file is named in the error.

    The current frame is the last entry of poses.json.
    """
    for name in REQUIRED_FILES:
        path = os.path.join(scene_dir, name)
        if not os.path.isfile(path):
            raise FormatError("missing file", path)

    frames, poses = load_poses(os.path.join(scene_dir, "poses.json"))
    if not frames:
        raise FormatError("no frames listed", os.path.join(scene_dir, "poses.json"))
    cameras = load_cameras(os.path.join(scene_dir, "cameras.json"))
    boxes: dict[int, list[Box3D]] = {f: [] for f in frames}
    for box in load_boxes(os.path.join(scene_dir, "boxes.json")):
        boxes.setdefault(box.frame_id, []).append(box)

    scene = SceneData(frames=frames, poses=poses, cameras=cameras, boxes=boxes)
    for frame in frames:
        path = lidar_path(scene_dir, frame)
        if not os.path.isfile(path):
            raise FormatError("missing file", path)
        scene.lidar[frame] = read_points(path)

        masks = {}
        for cam in cameras:
            path = mask_path(scene_dir, frame, cam.name)
            if os.path.isfile(path):
                mask = read_mask(path)
                try:
                    mask.check_camera(cam)
                except ShapeError as e:
                    raise FormatError(str(e), path) from None
                masks[cam.name] = mask
        scene.masks[frame] = masks

        path = radar_path(scene_dir, frame)
        if os.path.isfile(path):
            scene.radar[frame] = read_points(path)
    return scene


def write_scene(scene: SceneData, scene_dir: str) -> str:
    """Write every part of `scene` in the directory layout above."""
    os.makedirs(scene_dir, exist_ok=True)
    save_to_json(
        [{"frame_id": f, "matrix": scene.poses[f].matrix.reshape(-1).tolist()} for f in scene.frames],
        os.path.join(scene_dir, "poses.json"),
    )
    save_to_json(
        [
            {
                "name": cam.name,
                "width": cam.width,
                "height": cam.height,
                "intrinsics": cam.intrinsics.reshape(-1).tolist(),
                "extrinsics": cam.extrinsics.matrix.reshape(-1).tolist(),
            }
            for cam in scene.cameras
        ],
        os.path.join(scene_dir, "cameras.json"),
    )
    save_to_json(
        [box.model_dump() for f in scene.frames for box in scene.boxes.get(f, [])],
        os.path.join(scene_dir, "boxes.json"),
    )
    for frame in scene.frames:
        write_points(lidar_path(scene_dir, frame), scene.lidar[frame])
        for cam_name, mask in scene.masks.get(frame, {}).items():
            write_mask(mask_path(scene_dir, frame, cam_name), mask)
        if frame in scene.radar:
            write_points(radar_path(scene_dir, frame), scene.radar[frame])
    return scene_dir
