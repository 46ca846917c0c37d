"""
Aggregator Agent: densifies tracked objects in their box frames and merges
labeled static points across frames in the global frame.
"""

from typing import Optional

import numpy as np

from models.errors import ShapeError
from models.geometry import LabeledPointCloud, RigidPose
from models.scene import ObjectPoints
from models.state import PseudoLabelState
from tools.console import log, warn
from tools.geometry import transform_points

QUANTUM = 1e-6


def _dedup_across_frames(local: np.ndarray, frame_of: np.ndarray) -> np.ndarray:
    """
    Keep a point unless the same box-frame position already appeared in an earlier frame.

    Repeats inside one frame are kept.
    """
    if len(local) == 0:
        return np.zeros(0, dtype=bool)
    keys = np.round(local / QUANTUM).astype(np.int64)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    return frame_of[first[inverse.reshape(-1)]] == frame_of


def aggregate_dynamic(
    per_frame_objects: dict[int, list[ObjectPoints]],
    window: list[int],
    target: Optional[int] = None,
) -> LabeledPointCloud:
    """
    Union each track's points in its box frame over the window, placed at the target-frame box.

    Args:
        per_frame_objects: frame id -> object point sets from extract_objects.
        window: frame ids in chronological order.
        target: frame to place objects in (default: last frame of the window).

    Returns:
        Densified object points in the target frame, tracks in ascending id order.
        Tracks without a box in the target frame are skipped.
    """
    if not window:
        return LabeledPointCloud.empty()
    target = window[-1] if target is None else target
    placement = {obj.box.track_id: obj.box for obj in per_frame_objects.get(target, [])}

    pieces: dict[int, list[tuple[int, LabeledPointCloud]]] = {}
    for frame in window:
        for obj in per_frame_objects.get(frame, []):
            local = obj.points.with_xyz(obj.box.to_local(obj.points.xyz))
            pieces.setdefault(obj.box.track_id, []).append((frame, local))

    parts = []
    for track in sorted(pieces):
        box = placement.get(track)
        if box is None:
            continue
        clouds = [cloud for _, cloud in pieces[track]]
        frame_of = np.concatenate([np.full(len(c), f) for f, c in pieces[track]])
        merged = LabeledPointCloud.concat(clouds)
        merged = merged.subset(_dedup_across_frames(merged.xyz, frame_of))
        placed = merged.with_xyz(box.pose.apply(merged.xyz))
        parts.append(placed.with_attrs(**{
            "class": float(box.class_id),
            "track": float(track),
            "conf": 1.0,
        }))
    return LabeledPointCloud.concat(parts)


def aggregate_static(per_frame: list[LabeledPointCloud], poses: list[RigidPose]) -> LabeledPointCloud:
    """Transform each frame's labeled static points to the global frame and concatenate."""
    if len(per_frame) != len(poses):
        raise ShapeError(f"aggregate_static: {len(per_frame)} clouds but {len(poses)} poses")
    return LabeledPointCloud.concat(transform_points(c, p) for c, p in zip(per_frame, poses))


def aggregator_agent(state: PseudoLabelState) -> dict:
    """
    Returns:
        Partial state with 'dynamic' (current frame) and 'static_global'.
    """
    scene = state["scene"]
    frames = state.get("frames") or scene.frames
    labeled = state["labeled"]
    dynamic = aggregate_dynamic(state["objects"], frames, target=frames[-1])
    static_global = aggregate_static([labeled[f] for f in frames], [scene.poses[f] for f in frames])

    tracks = {box.track_id for f in frames for box in scene.boxes.get(f, [])}
    skipped = sorted(tracks - {b.track_id for b in scene.boxes.get(frames[-1], [])})
    warnings = []
    if skipped:
        msg = f"track(s) {skipped} absent from frame {frames[-1]}, skipped"
        warn("Aggregate", msg)
        warnings.append(msg)
    log("Aggregate", f"{len(dynamic)} dynamic points, {len(static_global)} static points in world frame")
    return {
        "dynamic": dynamic,
        "static_global": static_global,
        "counts": {"dynamic": len(dynamic), "aggregated": len(static_global)},
        "warnings": warnings,
    }
