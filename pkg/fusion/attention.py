"""
Multi-head deformable attention over a single-scale feature plane.

Each reference point predicts per-head sampling offsets and attention
weights from its query vector, then averages bilinear samples of the
projected value plane.
"""

from typing import Optional

import numpy as np

from models.errors import ShapeError
from models.fusion import BlockWeights, FusionConfig
from models.grid import check_plane
from tools.geometry import bilinear_sample
from tools.nn_ops import linear, linear_last, softmax


def offset_limit(height: int, width: int) -> float:
    return (height + width) / 4.0


def mda(
    query: np.ndarray,
    value: np.ndarray,
    pos_enc: Optional[np.ndarray],
    ref_points: np.ndarray,
    w: BlockWeights,
    cfg: FusionConfig,
) -> np.ndarray:
    """
    Deformable attention.

    Args:
        query: C' x Hq x Wq plane; the query vector is sampled from it at each reference point.
        value: C' x H x W plane to attend over.
        pos_enc: optional C' x Hq x Wq encoding added to the query plane.
        ref_points: (..., 2) continuous (h, w) coordinates in the value plane.
        w: view holding offset/attn/value/out linear weights.
        cfg: supplies heads and sampling points.

    Returns:
        C' x ... features, one vector per reference point.
    """
    query = check_plane(query, "mda")
    value = check_plane(value, "mda", query.shape[0])
    channels = value.shape[0]
    heads, points = cfg.heads, cfg.points
    if channels % heads:
        raise ShapeError(f"mda: {channels} channels do not split into {heads} heads")
    ref_points = np.asarray(ref_points, dtype=np.float64)
    if ref_points.shape[-1] != 2:
        raise ShapeError(f"mda: reference points need a trailing (h, w) axis, got {ref_points.shape}")
    if pos_enc is not None:
        if pos_enc.shape != query.shape:
            raise ShapeError(f"mda: positional encoding {pos_enc.shape} does not match query {query.shape}")
        query = query + pos_enc

    lead = ref_points.shape[:-1]
    ref = ref_points.reshape(-1, 2)
    q = bilinear_sample(query, ref).values  # (N, C')

    limit = offset_limit(*value.shape[1:])
    offsets = linear_last(q, w["offset.w"], w["offset.b"], block="mda.offset")
    offsets = np.clip(offsets, -limit, limit).reshape(-1, heads, points, 2)
    logits = linear_last(q, w["attn.w"], w["attn.b"], block="mda.attn").reshape(-1, heads, points)
    attn = softmax(logits, axis=-1)

    projected = linear(value, w["value.w"], w["value.b"], block="mda.value")
    d = channels // heads
    per_head = []
    for h in range(heads):
        locations = ref[:, None, :] + offsets[:, h]  # (N, points, 2)
        samples = bilinear_sample(projected[h * d:(h + 1) * d], locations).values  # (N, points, d)
        per_head.append(np.einsum("ns,nsd->nd", attn[:, h], samples))
    out = linear_last(np.concatenate(per_head, axis=1), w["out.w"], w["out.b"], block="mda.out")
    return np.moveaxis(out, -1, 0).reshape(channels, *lead)
