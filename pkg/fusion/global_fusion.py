"""
Global cross-attention fusion: the LAF volume, flattened to BEV, queries the
camera and radar BEV planes through two deformable attention streams.
"""

import numpy as np

from models.errors import ShapeError
from models.fusion import BlockWeights, FusionConfig
from models.grid import check_volume
from fusion.attention import mda
from tools.grid_ops import bev_reference_points, c2h, h2c
from tools.nn_ops import conv3d, linear

STREAMS = ("c", "r")


def to_bev(volume: np.ndarray, w: BlockWeights, stream: str) -> np.ndarray:
    """h2c followed by the stream's linear projection."""
    p = w.block(f"gcf.proj.{stream}")
    return linear(h2c(volume), p["w"], p["b"], block=f"gcf.proj.{stream}")


def gcf(f_laf: np.ndarray, f_c: np.ndarray, f_r: np.ndarray, w: BlockWeights, cfg: FusionConfig) -> np.ndarray:
    """Fused volume F_m = conv(c2h(sum over streams of MDA) + F_laf)."""
    volumes = {
        "laf": check_volume(f_laf, "gcf"),
        "c": check_volume(f_c, "gcf"),
        "r": check_volume(f_r, "gcf"),
    }
    shapes = {v.shape for v in volumes.values()}
    if len(shapes) != 1:
        raise ShapeError(f"gcf: input volumes differ in shape {sorted(shapes)}")
    _, height, width, depth = f_laf.shape

    query = to_bev(volumes["laf"], w, "laf")
    ref = bev_reference_points(height, width)
    attended = np.zeros_like(query)
    for stream in STREAMS:
        attended += mda(
            query,
            to_bev(volumes[stream], w, stream),
            w[f"gcf.pos.{stream}"],
            ref,
            w.block(f"gcf.mda.{stream}"),
            cfg,
        )
    return conv3d(c2h(attended, depth) + volumes["laf"], w["gcf.conv.w"], w["gcf.conv.b"], block="gcf.conv")
