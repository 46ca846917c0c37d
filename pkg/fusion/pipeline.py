"""
End-to-end fusion dataflow for one scene: radar and camera branches per
frame, local and global fusion, temporal fusion over the last T frames,
then the occupancy head.
"""

from typing import NamedTuple

import numpy as np

from models.errors import ShapeError
from models.fusion import BlockWeights, FusionConfig
from models.geometry import LabeledPointCloud, relative_pose
from models.grid import GridSpec, VoxelGrid
from models.scene import SceneData
from fusion.global_fusion import gcf
from fusion.head import occupancy_head, predict_grid
from fusion.image_lift import camera_plane_from_mask, image_lift
from fusion.local_fusion import laf
from fusion.pillar import pillar_encode
from fusion.radar_height import rhs
from fusion.temporal import temporal_fuse
from tools.console import debug


class FusionOutput(NamedTuple):
    probs: np.ndarray  # K x H x W x Z
    grid: VoxelGrid


def fuse_frame(scene: SceneData, frame: int, grid: GridSpec, w: BlockWeights, cfg: FusionConfig) -> np.ndarray:
    """Fused volume F_m for one frame."""
    radar = scene.radar.get(frame, LabeledPointCloud.empty())
    f_r = rhs(pillar_encode(radar, grid, w), w, cfg)

    masks = scene.masks.get(frame, {})
    cams = [cam for cam in sorted(scene.cameras, key=lambda c: c.name) if cam.name in masks]
    planes = [camera_plane_from_mask(masks[cam.name], w, cfg) for cam in cams]
    f_c = image_lift(planes, cams, grid, w, cfg)

    f_laf, _ = laf(f_c, f_r, w)
    debug("Fuse", f"frame {frame}: {len(radar)} radar points, {len(cams)} cameras")
    return gcf(f_laf, f_c, f_r, w, cfg)


def fuse_scene(scene: SceneData, grid: GridSpec, w: BlockWeights, cfg: FusionConfig) -> FusionOutput:
    """
    Run the fusion stack on the last `cfg.frames` frames of a scene.

    Raises:
        ShapeError: the grid does not match the config or the scene is too short.
    """
    if grid.volume_shape != (cfg.height, cfg.width, cfg.depth):
        raise ShapeError(f"fusion grid {grid.volume_shape} does not match config {(cfg.height, cfg.width, cfg.depth)}")
    if len(scene.frames) < cfg.frames:
        raise ShapeError(f"temporal: scene has {len(scene.frames)} frames, config needs {cfg.frames}")

    window = list(reversed(scene.frames[-cfg.frames:]))  # current first
    current = window[0]
    volumes = [fuse_frame(scene, f, grid, w, cfg) for f in window]
    poses = [relative_pose(scene.poses[current], scene.poses[f]) for f in window[1:]]
    fused = temporal_fuse(volumes, poses, grid, w)
    probs = occupancy_head(fused, w)
    return FusionOutput(probs, predict_grid(probs, grid))
