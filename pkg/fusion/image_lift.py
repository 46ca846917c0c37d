"""
Image-to-voxel lift: every voxel center is projected into each camera and
gathers features from that camera's plane by deformable attention.
"""

import numpy as np

from models.errors import ShapeError
from models.fusion import BlockWeights, FusionConfig
from models.geometry import CameraModel
from models.grid import GridSpec, check_plane
from models.scene import SemanticMask
from fusion.attention import mda
from tools.geometry import project_to_image
from tools.grid_ops import volume_centers
from tools.nn_ops import linear


def pixel_to_feature(uv: np.ndarray, cam: CameraModel, plane_shape: tuple[int, int]) -> np.ndarray:
    """Pixel (u, v) -> continuous (h, w) on a feature plane covering the full image."""
    hf, wf = plane_shape
    h = (uv[:, 1] + 0.5) * hf / cam.height - 0.5
    w = (uv[:, 0] + 0.5) * wf / cam.width - 0.5
    return np.stack([np.clip(h, 0, hf - 1), np.clip(w, 0, wf - 1)], axis=1)


def camera_plane_from_mask(mask: SemanticMask, w: BlockWeights, cfg: FusionConfig) -> np.ndarray:
    """
    C x Hf x Wf camera features built from a segmentation mask.

    One-hot classes scaled by confidence, averaged over stride x stride pixel
    blocks (trailing remainder cropped), then embedded to C channels.
    """
    s = cfg.image_stride
    hf, wf = mask.height // s, mask.width // s
    if hf == 0 or wf == 0:
        raise ShapeError(f"lift: {mask.width}x{mask.height} mask is smaller than stride {s}")
    classes = np.minimum(mask.classes[: hf * s, : wf * s].astype(np.int64), cfg.num_classes)
    conf = mask.confidences[: hf * s, : wf * s]
    onehot = np.zeros((cfg.num_classes + 1,) + classes.shape)
    np.put_along_axis(onehot, classes[None], conf[None], axis=0)
    # ids past the class table fall into a dropped overflow slot
    onehot = onehot[: cfg.num_classes]
    pooled = onehot.reshape(cfg.num_classes, hf, s, wf, s).mean(axis=(2, 4))
    embed = w.require("lift.embed.w", (cfg.channels, cfg.num_classes))
    return linear(pooled, embed, np.zeros(cfg.channels), block="lift.embed")


def image_lift(
    image_feats: list[np.ndarray],
    cams: list[CameraModel],
    grid: GridSpec,
    w: BlockWeights,
    cfg: FusionConfig,
) -> np.ndarray:
    """Camera volume F_c (C x H x W x Z); voxels no camera sees stay zero."""
    if len(image_feats) != len(cams):
        raise ShapeError(f"lift: {len(image_feats)} feature planes for {len(cams)} cameras")
    centers = volume_centers(grid)
    flat = centers.reshape(-1, 3)
    total = np.zeros((cfg.channels, len(flat)))
    seen = np.zeros(len(flat))
    attn_w = w.block("lift.mda")
    for plane, cam in zip(image_feats, cams):
        plane = check_plane(plane, f"lift[{cam.name}]", cfg.channels)
        proj = project_to_image(flat, cam)
        hits = np.flatnonzero(proj.valid)
        if hits.size == 0:
            continue
        ref = pixel_to_feature(proj.uv[hits], cam, plane.shape[1:])
        total[:, hits] += mda(plane, plane, None, ref, attn_w, cfg)
        seen[hits] += 1
    out = np.divide(total, seen, out=np.zeros_like(total), where=seen > 0)
    return out.reshape(cfg.channels, *centers.shape[:3])
