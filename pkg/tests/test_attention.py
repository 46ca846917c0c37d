"""
Tests for fusion/attention.py against a scalar loop re-implementation.
"""

import math

import numpy as np
import pytest

from models.errors import ShapeError
from models.fusion import BlockWeights, FusionConfig
from fusion.attention import mda, offset_limit
from tools.geometry import bilinear_sample


def _weights(channels, heads, points, rng, scale=0.5):
    hs = heads * points
    return BlockWeights({
        "offset.w": rng.normal(0, scale, (hs * 2, channels)), "offset.b": rng.normal(0, scale, hs * 2),
        "attn.w": rng.normal(0, scale, (hs, channels)), "attn.b": rng.normal(0, scale, hs),
        "value.w": rng.normal(0, scale, (channels, channels)), "value.b": rng.normal(0, scale, channels),
        "out.w": rng.normal(0, scale, (channels, channels)), "out.b": rng.normal(0, scale, channels),
    })


def _identity_weights(channels, heads, points):
    hs = heads * points
    return BlockWeights({
        "offset.w": np.zeros((hs * 2, channels)), "offset.b": np.zeros(hs * 2),
        "attn.w": np.zeros((hs, channels)), "attn.b": np.zeros(hs),
        "value.w": np.eye(channels), "value.b": np.zeros(channels),
        "out.w": np.eye(channels), "out.b": np.zeros(channels),
    })


def _lerp_sample(plane, h, w):
    """Scalar bilinear sample; zero vector outside [0, H-1] x [0, W-1]."""
    _, height, width = plane.shape
    if not (0 <= h <= height - 1 and 0 <= w <= width - 1):
        return np.zeros(plane.shape[0])
    h0, w0 = int(math.floor(h)), int(math.floor(w))
    h1, w1 = min(h0 + 1, height - 1), min(w0 + 1, width - 1)
    fh, fw = h - h0, w - w0
    return ((1 - fh) * (1 - fw) * plane[:, h0, w0] + (1 - fh) * fw * plane[:, h0, w1]
            + fh * (1 - fw) * plane[:, h1, w0] + fh * fw * plane[:, h1, w1])


def _loop_mda(query, value, pos_enc, refs, w, heads, points):
    channels, height, width = value.shape
    d = channels // heads
    limit = (height + width) / 4.0
    q_plane = query + pos_enc if pos_enc is not None else query
    projected = np.einsum("oc,chw->ohw", w["value.w"], value) + w["value.b"][:, None, None]
    out = np.zeros((channels, len(refs)))
    for n, (rh, rw) in enumerate(refs):
        q = _lerp_sample(q_plane, rh, rw)
        head_out = np.zeros(channels)
        for h in range(heads):
            logits = [w["attn.w"][h * points + s] @ q + w["attn.b"][h * points + s] for s in range(points)]
            top = max(logits)
            exps = [math.exp(x - top) for x in logits]
            for s in range(points):
                k = (h * points + s) * 2
                dh = min(max(w["offset.w"][k] @ q + w["offset.b"][k], -limit), limit)
                dw = min(max(w["offset.w"][k + 1] @ q + w["offset.b"][k + 1], -limit), limit)
                sample = _lerp_sample(projected[h * d:(h + 1) * d], rh + dh, rw + dw)
                head_out[h * d:(h + 1) * d] += exps[s] / sum(exps) * sample
        out[:, n] = w["out.w"] @ head_out + w["out.b"]
    return out


# ── reductions ──────────────────────────────────────────────────────────────

def test_single_point_identity_attention_is_bilinear_sampling(rng):
    cfg = FusionConfig(channels=4, depth=1, heads=1, points=1)
    value = rng.normal(size=(4, 5, 7))
    refs = np.column_stack([rng.uniform(0, 4, 30), rng.uniform(0, 6, 30)])
    out = mda(rng.normal(size=(4, 5, 7)), value, None, refs, _identity_weights(4, 1, 1), cfg)
    np.testing.assert_allclose(out, bilinear_sample(value, refs).values.T, atol=1e-12)


def test_offsets_are_clipped_to_the_plane_scale(rng):
    cfg = FusionConfig(channels=2, depth=1, heads=1, points=2)
    w = _identity_weights(2, 1, 2)
    w["out.b"] = np.array([0.25, -0.75])
    w["offset.b"] = np.full(4, 1e6)
    value = rng.normal(size=(2, 4, 4))
    refs = np.array([[3.0, 3.0], [0.0, 0.0]])
    # the clipped offset (+2, +2) lands outside for the first ref, inside for the second
    out = mda(value, value, None, refs, w, cfg)
    assert offset_limit(4, 4) == 2.0
    np.testing.assert_allclose(out[:, 0], w["out.b"], atol=1e-12)
    np.testing.assert_allclose(out[:, 1], value[:, 2, 2] + w["out.b"], atol=1e-12)


def test_output_keeps_reference_layout(rng):
    cfg = FusionConfig(channels=4, depth=1, heads=2, points=3)
    refs = np.stack(np.meshgrid(np.arange(3.0), np.arange(4.0), indexing="ij"), axis=-1)
    out = mda(rng.normal(size=(4, 3, 4)), rng.normal(size=(4, 3, 4)), None, refs, _weights(4, 2, 3, rng), cfg)
    assert out.shape == (4, 3, 4)


# ── loop oracle ─────────────────────────────────────────────────────────────

def test_matches_scalar_loop_oracle(rng):
    for _ in range(25):
        heads = int(rng.integers(1, 3))
        points = int(rng.integers(1, 4))
        channels = heads * int(rng.integers(1, 3))
        height, width = (int(v) for v in rng.integers(2, 6, size=2))
        cfg = FusionConfig(channels=channels, depth=1, heads=heads, points=points)
        w = _weights(channels, heads, points, rng, scale=float(rng.choice([0.3, 3.0])))
        query, value, pos = rng.normal(size=(3, channels, height, width))
        refs = np.column_stack([rng.uniform(0, height - 1, 6), rng.uniform(0, width - 1, 6)])
        refs[0] = (height - 1, width - 1)

        got = mda(query, value, pos, refs, w, cfg)
        np.testing.assert_allclose(got, _loop_mda(query, value, pos, refs, w, heads, points), atol=1e-12)


# ── shape errors ────────────────────────────────────────────────────────────

def test_positional_encoding_must_match_query(rng):
    cfg = FusionConfig(channels=2, depth=1, heads=1, points=1)
    with pytest.raises(ShapeError, match="positional encoding"):
        mda(np.zeros((2, 3, 3)), np.zeros((2, 3, 3)), np.zeros((2, 2, 3)), np.zeros((1, 2)),
            _identity_weights(2, 1, 1), cfg)


def test_reference_points_need_two_coordinates(rng):
    cfg = FusionConfig(channels=2, depth=1, heads=1, points=1)
    with pytest.raises(ShapeError, match="reference points"):
        mda(np.zeros((2, 3, 3)), np.zeros((2, 3, 3)), None, np.zeros((4, 3)), _identity_weights(2, 1, 1), cfg)
