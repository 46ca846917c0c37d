"""
Separator Agent: splits each LiDAR frame into per-box object points and the static remainder.
"""

import numpy as np

from models.geometry import LabeledPointCloud
from models.scene import Box3D, ObjectPoints
from models.state import PseudoLabelState
from tools.console import log
from tools.parallel import map_ordered


def box_membership(xyz: np.ndarray, boxes: list[Box3D]) -> np.ndarray:
    """
    Index of the owning box per point, -1 for none.

    A point inside several boxes goes to the box with the nearest center
    (lowest box index on exact ties).
    """
    owner = np.full(len(xyz), -1, dtype=np.int64)
    if not boxes or len(xyz) == 0:
        return owner
    inside = np.stack([box.contains(xyz) for box in boxes])  # (B, N)
    centers = np.asarray([box.center for box in boxes], dtype=np.float64)
    dist2 = ((xyz[None, :, :] - centers[:, None, :]) ** 2).sum(axis=2)
    dist2 = np.where(inside, dist2, np.inf)
    hit = inside.any(axis=0)
    owner[hit] = np.argmin(dist2[:, hit], axis=0)
    return owner


def extract_objects(pts: LabeledPointCloud, boxes: list[Box3D]) -> tuple[list[ObjectPoints], LabeledPointCloud]:
    """
    Partition a cloud by box membership (closed box intervals).

    Object points take the box class and track id with confidence 1.

    Returns:
        (one ObjectPoints per box, in box order; static points in no box)
    """
    owner = box_membership(pts.xyz, boxes)
    objects = []
    for b, box in enumerate(boxes):
        part = pts.subset(owner == b)
        objects.append(ObjectPoints(box, part.with_attrs(**{
            "class": float(box.class_id),
            "track": float(box.track_id),
            "conf": 1.0,
        })))
    return objects, pts.subset(owner < 0)


def separator_agent(state: PseudoLabelState) -> dict:
    """
    Run extract_objects on every frame.

    Returns:
        Partial state with 'objects' and 'static'.
    """
    scene = state["scene"]
    frames = state.get("frames") or scene.frames

    def _one(frame):
        return extract_objects(scene.lidar[frame], scene.boxes.get(frame, []))

    results = map_ordered(_one, frames)
    objects = {f: r[0] for f, r in zip(frames, results)}
    static = {f: r[1] for f, r in zip(frames, results)}
    n_obj = sum(len(o.points) for objs in objects.values() for o in objs)
    n_static = sum(len(s) for s in static.values())
    log("Separate", f"{n_obj} object points, {n_static} static points over {len(frames)} frame(s)")
    return {"objects": objects, "static": static, "counts": {"extracted": n_obj, "static": n_static}}
