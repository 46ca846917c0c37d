"""
Fusion data model: block configuration and explicit parameter bundles.

Every fusion block reads its parameters from a BlockWeights bundle by name;
nothing is hidden in module state, so tests can inject hand-set weights.
"""

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from models.errors import ShapeError

# Decorated per-point radar features fed to the pillar MLP: raw channels
# followed by the offset from the pillar center.
PILLAR_FEATURES = ("x", "y", "z", "vx", "vy", "amp", "snr", "t", "dx", "dy")

INIT_STD = 0.02


class FusionConfig(BaseModel):
    """Dimensions of the fusion stack."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    channels: int = Field(default=8, ge=1, description="C")
    height: int = Field(default=16, ge=1, description="H (grid NY)")
    width: int = Field(default=24, ge=1, description="W (grid NX)")
    depth: int = Field(default=4, ge=1, description="Z (grid NZ)")
    heads: int = Field(default=4, ge=1, description="n_h")
    points: int = Field(default=4, ge=1, description="n_s, sampling points per head")
    frames: int = Field(default=3, ge=1, description="T")
    num_classes: int = Field(default=12, ge=1)
    gate_layers: int = Field(default=2, ge=1)
    encoder_layers: int = Field(default=2, ge=1)
    bottleneck_layers: int = Field(default=2, ge=1)
    head_layers: int = Field(default=2, ge=1)
    image_stride: int = Field(default=8, ge=1, description="pixels per camera feature cell")

    @model_validator(mode="after")
    def _check_head_split(self) -> "FusionConfig":
        if (self.channels * self.depth) % self.heads:
            raise ValueError(f"C*Z = {self.channels * self.depth} is not divisible by {self.heads} heads")
        if self.channels % self.heads:
            raise ValueError(f"C = {self.channels} is not divisible by {self.heads} heads")
        return self

    @property
    def bev_channels(self) -> int:
        """C' = C x Z."""
        return self.channels * self.depth

    @property
    def volume_shape(self) -> tuple[int, int, int, int]:
        return self.channels, self.height, self.width, self.depth


def _mda_shapes(prefix: str, channels: int, cfg: FusionConfig) -> dict[str, tuple]:
    hs = cfg.heads * cfg.points
    return {
        f"{prefix}.offset.w": (hs * 2, channels), f"{prefix}.offset.b": (hs * 2,),
        f"{prefix}.attn.w": (hs, channels), f"{prefix}.attn.b": (hs,),
        f"{prefix}.value.w": (channels, channels), f"{prefix}.value.b": (channels,),
        f"{prefix}.out.w": (channels, channels), f"{prefix}.out.b": (channels,),
    }


def weight_shapes(cfg: FusionConfig) -> dict[str, tuple]:
    """Canonical tensor name → shape table for a complete bundle."""
    c, z, cp = cfg.channels, cfg.depth, cfg.bev_channels
    k3 = (3, 3, 3)
    shapes: dict[str, tuple] = {
        "pillar.w": (c, len(PILLAR_FEATURES)), "pillar.b": (c,),
        "rhs.pos_h": (c, z),
        "rhs.out.w": (c, c, *k3), "rhs.out.b": (c,),
        "laf.fw.0.w": (c, 2 * c, *k3), "laf.fw.0.b": (c,),
        "laf.fw.1.w": (1, c, *k3), "laf.fw.1.b": (1,),
        "gcf.pos.c": (cp, cfg.height, cfg.width), "gcf.pos.r": (cp, cfg.height, cfg.width),
        "gcf.conv.w": (c, c, *k3), "gcf.conv.b": (c,),
        "lift.embed.w": (c, cfg.num_classes),
    }
    for i in range(cfg.gate_layers):
        shapes[f"rhs.gate.{i}.w"] = (c, c, *k3)
        shapes[f"rhs.gate.{i}.b"] = (c,)
    for i in range(cfg.encoder_layers):
        shapes[f"rhs.enc.{i}.w"] = (c, c, *k3)
        shapes[f"rhs.enc.{i}.b"] = (c,)
    for stream in ("laf", "c", "r"):
        shapes[f"gcf.proj.{stream}.w"] = (cp, cp)
        shapes[f"gcf.proj.{stream}.b"] = (cp,)
    shapes.update(_mda_shapes("gcf.mda.c", cp, cfg))
    shapes.update(_mda_shapes("gcf.mda.r", cp, cfg))
    shapes.update(_mda_shapes("lift.mda", c, cfg))
    for i in range(cfg.bottleneck_layers):
        c_in = cfg.frames * c if i == 0 else c
        shapes[f"temporal.bottleneck.{i}.w"] = (c, c_in, *k3)
        shapes[f"temporal.bottleneck.{i}.b"] = (c,)
        shapes[f"temporal.bottleneck.{i}.scale"] = (c,)
        shapes[f"temporal.bottleneck.{i}.shift"] = (c,)
    for i in range(cfg.head_layers):
        c_out = cfg.num_classes if i == cfg.head_layers - 1 else c
        shapes[f"head.{i}.w"] = (c_out, c)
        shapes[f"head.{i}.b"] = (c_out,)
    return shapes


@dataclass(eq=False)
class BlockWeights:
    """Named float64 tensors; `block(prefix)` gives a view scoped to one block."""

    tensors: dict[str, np.ndarray] = field(default_factory=dict)
    prefix: str = ""

    def _full(self, name: str) -> str:
        return f"{self.prefix}.{name}" if self.prefix else name

    def __contains__(self, name: str) -> bool:
        return self._full(name) in self.tensors

    def __getitem__(self, name: str) -> np.ndarray:
        full = self._full(name)
        try:
            return self.tensors[full]
        except KeyError:
            raise ShapeError(f"missing weight tensor '{full}'") from None

    def __setitem__(self, name: str, value) -> None:
        self.tensors[self._full(name)] = np.asarray(value, dtype=np.float64)

    def get(self, name: str, default=None) -> Optional[np.ndarray]:
        return self.tensors.get(self._full(name), default)

    def block(self, prefix: str) -> "BlockWeights":
        return BlockWeights(self.tensors, self._full(prefix))

    def layers(self, prefix: str) -> Iterator[tuple[int, "BlockWeights"]]:
        """Yield (i, view) for prefix.0, prefix.1, ... while a weight tensor exists."""
        i = 0
        while f"{prefix}.{i}.w" in self:
            yield i, self.block(f"{prefix}.{i}")
            i += 1

    def require(self, name: str, shape: tuple) -> np.ndarray:
        t = self[name]
        if t.shape != tuple(shape):
            raise ShapeError(f"weight '{self._full(name)}' has shape {t.shape}, expected {tuple(shape)}")
        return t

    def names(self) -> list[str]:
        return sorted(self.tensors)

    def validate(self, cfg: Optional[FusionConfig] = None) -> "BlockWeights":
        for name, t in self.tensors.items():
            if not np.all(np.isfinite(t)):
                raise ShapeError(f"weight '{name}' has non-finite values")
        if cfg is not None:
            for name, shape in weight_shapes(cfg).items():
                BlockWeights(self.tensors).require(name, shape)
        return self

    def copy(self) -> "BlockWeights":
        return BlockWeights({k: v.copy() for k, v in self.tensors.items()}, self.prefix)


def init_block_weights(cfg: FusionConfig, seed: int = 0) -> BlockWeights:
    """Seeded Gaussian weights (std 0.02); biases and BN shifts zero, BN scales one."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in sorted(weight_shapes(cfg).items()):
        if name.endswith(".b") or name.endswith(".shift"):
            tensors[name] = np.zeros(shape)
        elif name.endswith(".scale"):
            tensors[name] = np.ones(shape)
        else:
            tensors[name] = rng.normal(0.0, INIT_STD, size=shape)
    return BlockWeights(tensors)


def zero_block_weights(cfg: FusionConfig) -> BlockWeights:
    return BlockWeights({name: np.zeros(shape) for name, shape in weight_shapes(cfg).items()})
