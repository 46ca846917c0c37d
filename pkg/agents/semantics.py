"""
Semantics Agent: labels static points from the segmentation masks of every camera.
"""

import numpy as np

from models.geometry import CameraModel, LabeledPointCloud
from models.grid import UNKNOWN
from models.scene import SemanticMask
from models.state import PseudoLabelState
from tools.console import log
from tools.geometry import project_to_image
from tools.parallel import map_ordered


def assign_semantics(
    cloud: LabeledPointCloud, masks: dict[str, SemanticMask], cams: list[CameraModel]
) -> LabeledPointCloud:
    """
    Give each point the (class, confidence) of its most confident camera hit.

    Ties go to the smaller depth, then to the camera whose name sorts first.
    Points no camera sees get class 255 and confidence 0.
    """
    n = len(cloud)
    best_cls = np.full(n, UNKNOWN, dtype=np.int64)
    best_conf = np.full(n, -np.inf)
    best_depth = np.full(n, np.inf)
    for cam in sorted(cams, key=lambda c: c.name):
        mask = masks.get(cam.name)
        if mask is None:
            continue
        mask.check_camera(cam)
        proj = project_to_image(cloud.xyz, cam)
        hit = np.flatnonzero(proj.valid)
        if hit.size == 0:
            continue
        col = np.floor(proj.uv[hit, 0]).astype(np.int64)
        row = np.floor(proj.uv[hit, 1]).astype(np.int64)
        conf = mask.confidences[row, col]
        depth = proj.depth[hit]
        better = (conf > best_conf[hit]) | ((conf == best_conf[hit]) & (depth < best_depth[hit]))
        take = hit[better]
        best_cls[take] = mask.classes[row[better], col[better]]
        best_conf[take] = conf[better]
        best_depth[take] = depth[better]
    seen = np.isfinite(best_conf)
    return cloud.with_attrs(**{
        "class": np.where(seen, best_cls, UNKNOWN).astype(np.float64),
        "conf": np.where(seen, best_conf, 0.0),
    })


def semantics_agent(state: PseudoLabelState) -> dict:
    """
    Returns:
        Partial state with 'labeled'.
    """
    scene = state["scene"]
    filtered = state["filtered"]
    frames = list(filtered)

    def _one(frame):
        return assign_semantics(filtered[frame], scene.masks.get(frame, {}), scene.cameras)

    labeled = dict(zip(frames, map_ordered(_one, frames)))
    known = sum(int(np.count_nonzero(c.class_ids != UNKNOWN)) for c in labeled.values())
    total = sum(len(c) for c in labeled.values())
    log("Assign", f"{known} of {total} static points labeled by {len(scene.cameras)} camera(s)")
    return {"labeled": labeled, "counts": {"labeled": known, "unknown": total - known}}
