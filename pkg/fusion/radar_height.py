"""
Radar height self-attention: lifts the radar BEV plane into a volume and
reweights it per height with a learned gate.
"""

from typing import NamedTuple

import numpy as np

from models.errors import ShapeError
from models.fusion import BlockWeights, FusionConfig
from models.grid import check_plane
from tools.nn_ops import conv3d, relu, sigmoid, softplus

LN2 = np.log(2.0)


class RadarHeightTrace(NamedTuple):
    initial: np.ndarray  # plane repeated Z times
    gate: np.ndarray  # sigmoid of the gate network
    modulated: np.ndarray  # initial * gate, before the output conv
    attention: np.ndarray  # conv(modulated)
    output: np.ndarray  # radar encoder of initial + attention


def shifted_softplus(x: np.ndarray) -> np.ndarray:
    """softplus(x) - ln 2, zero at zero."""
    return softplus(x) - LN2


def expand_height(plane: np.ndarray, depth: int) -> np.ndarray:
    return np.repeat(plane[..., None], depth, axis=-1)


def rhs_trace(plane: np.ndarray, w: BlockWeights, cfg: FusionConfig) -> RadarHeightTrace:
    plane = check_plane(plane, "rhs", cfg.channels)
    if plane.shape[1:] != (cfg.height, cfg.width):
        raise ShapeError(f"rhs: plane is {plane.shape[1:]}, config expects {(cfg.height, cfg.width)}")
    initial = expand_height(plane, cfg.depth)
    pos_h = w.require("rhs.pos_h", (cfg.channels, cfg.depth))[:, None, None, :]

    x = initial + pos_h
    gate_layers = list(w.layers("rhs.gate"))
    for i, layer in gate_layers:
        x = conv3d(x, layer["w"], layer["b"], block=f"rhs.gate.{i}")
        if i < len(gate_layers) - 1:
            x = relu(x)
    gate = sigmoid(x)

    modulated = initial * gate
    attention = conv3d(modulated, w["rhs.out.w"], w["rhs.out.b"], block="rhs.out")

    x = initial + attention
    for i, layer in w.layers("rhs.enc"):
        x = shifted_softplus(conv3d(x, layer["w"], layer["b"], block=f"rhs.enc.{i}"))
    return RadarHeightTrace(initial, gate, modulated, attention, x)


def rhs(plane: np.ndarray, w: BlockWeights, cfg: FusionConfig) -> np.ndarray:
    """Radar BEV plane (C x H x W) -> radar feature volume F_r (C x H x W x Z)."""
    return rhs_trace(plane, w, cfg).output
