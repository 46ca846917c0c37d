"""
Drivable region: coarse ground area around the ego vehicle and nearby boxes.
"""

import numpy as np

from config.run_config import PseudoLabelParams
from models.geometry import RigidPose
from models.scene import Box3D, DrivableRegion, Rect


def ego_rect(ego_pose: RigidPose, ahead: float, behind: float, side: float) -> Rect:
    """Rectangle spanning `behind` to `ahead` along the ego heading and `side` to each side."""
    yaw = ego_pose.yaw
    shift = (ahead - behind) / 2.0
    cx, cy = ego_pose.translation[:2] + shift * np.array([np.cos(yaw), np.sin(yaw)])
    return Rect(float(cx), float(cy), (ahead + behind) / 2.0, side, yaw)


def box_footprint(box: Box3D, margin: float) -> Rect:
    """Box footprint grown by `margin` on every side."""
    length, width, _ = box.size
    return Rect(box.center[0], box.center[1], length / 2.0 + margin, width / 2.0 + margin, box.yaw)


def drivable_region(
    ego_pose: RigidPose, boxes: list[Box3D], params: PseudoLabelParams = PseudoLabelParams()
) -> DrivableRegion:
    rects = [ego_rect(ego_pose, params.ego_ahead, params.ego_behind, params.ego_side)]
    rects += [box_footprint(box, params.footprint_margin) for box in boxes]
    return DrivableRegion(tuple(rects))
