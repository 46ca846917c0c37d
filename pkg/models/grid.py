"""
Grid data model: metric voxel grids and the dense feature tensors laid over them.

Axis conventions used everywhere in occukit:
    VoxelGrid labels       (NX, NY, NZ), flattened with ((ix*NY)+iy)*NZ+iz
    FeatureVolume          (C, H, W, Z) with H = NY, W = NX, Z = NZ
    FeaturePlane           (C, H, W)
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, model_validator

from models.errors import GridError, ShapeError

# Dense real-valued carriers. Plain arrays keep the numerics vectorized; shape
# checks live in check_volume / check_plane.
FeatureVolume = npt.NDArray[np.float64]
FeaturePlane = npt.NDArray[np.float64]

FREE = 0
UNKNOWN = 255


class GridSpec(BaseModel):
    """Axis-aligned metric region split into cubic voxels."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    x_range: tuple[float, float] = Field(description="meters (min, max)")
    y_range: tuple[float, float] = Field(description="meters (min, max)")
    z_range: tuple[float, float] = Field(description="meters (min, max)")
    voxel_size: float = Field(gt=0, description="edge length in meters")

    @model_validator(mode="after")
    def _check_multiples(self) -> "GridSpec":
        for axis, (lo, hi) in zip("xyz", (self.x_range, self.y_range, self.z_range)):
            extent = hi - lo
            if extent <= 0:
                raise GridError(f"{axis}_range must be increasing, got ({lo}, {hi})")
            count = round(extent / self.voxel_size)
            if count < 1 or abs(count * self.voxel_size - extent) > 1e-9 * max(1.0, extent):
                raise GridError(
                    f"{axis} extent {extent} is not a multiple of voxel_size {self.voxel_size}"
                )
        return self

    @classmethod
    def preset(cls, name: str) -> "GridSpec":
        try:
            return cls(**GRID_PRESETS[name])
        except KeyError:
            raise GridError(f"unknown grid preset '{name}' (known: {', '.join(GRID_PRESETS)})")

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(
            int(round((hi - lo) / self.voxel_size))
            for lo, hi in (self.x_range, self.y_range, self.z_range)
        )

    @property
    def num_voxels(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    @property
    def mins(self) -> np.ndarray:
        return np.array([self.x_range[0], self.y_range[0], self.z_range[0]], dtype=np.float64)

    @property
    def maxs(self) -> np.ndarray:
        return np.array([self.x_range[1], self.y_range[1], self.z_range[1]], dtype=np.float64)

    @property
    def volume_shape(self) -> tuple[int, int, int]:
        """(H, W, Z) of a FeatureVolume laid over this grid."""
        nx, ny, nz = self.dims
        return ny, nx, nz

    def linear_index(self, ix, iy, iz):
        _, ny, nz = self.dims
        return (np.asarray(ix) * ny + np.asarray(iy)) * nz + np.asarray(iz)

    def unravel(self, linear) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return np.unravel_index(np.asarray(linear), self.dims)

    def voxel_center(self, ix, iy, iz) -> np.ndarray:
        idx = np.stack(np.broadcast_arrays(ix, iy, iz), axis=-1).astype(np.float64)
        return self.mins + (idx + 0.5) * self.voxel_size


GRID_PRESETS: dict[str, dict] = {
    # 240 x 160 x 16
    "omnihd": dict(x_range=(-60.0, 60.0), y_range=(-40.0, 40.0), z_range=(-3.0, 5.0), voxel_size=0.5),
    # 200 x 200 x 16
    "nuscenes": dict(x_range=(-50.0, 50.0), y_range=(-50.0, 50.0), z_range=(-3.0, 5.0), voxel_size=0.5),
    # 24 x 16 x 4, sized for the fusion blocks' default FusionConfig
    "desk": dict(x_range=(-12.0, 12.0), y_range=(-8.0, 8.0), z_range=(-2.0, 2.0), voxel_size=1.0),
}


@dataclass(eq=False)
class VoxelGrid:
    """Dense class-id grid. Label 0 is free space."""

    spec: GridSpec
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint8).reshape(-1)
        if self.labels.size != self.spec.num_voxels:
            raise GridError(
                f"label array has {self.labels.size} entries, grid needs {self.spec.num_voxels}"
            )
        if not 1 <= self.num_classes <= 256:
            raise GridError(f"num_classes must be in [1, 256], got {self.num_classes}")
        if self.labels.size and int(self.labels.max()) >= self.num_classes:
            raise GridError(
                f"label {int(self.labels.max())} out of range for {self.num_classes} classes"
            )

    @classmethod
    def free(cls, spec: GridSpec, num_classes: int) -> "VoxelGrid":
        return cls(spec, np.zeros(spec.num_voxels, dtype=np.uint8), num_classes)

    @classmethod
    def from_volume(cls, spec: GridSpec, volume: np.ndarray, num_classes: int) -> "VoxelGrid":
        """Build from an (NX, NY, NZ) label array."""
        if volume.shape != spec.dims:
            raise GridError(f"volume shape {volume.shape} does not match grid dims {spec.dims}")
        return cls(spec, volume.reshape(-1), num_classes)

    def as_volume(self) -> np.ndarray:
        return self.labels.reshape(self.spec.dims)

    @property
    def occupied(self) -> np.ndarray:
        return self.labels != FREE


def check_volume(v: np.ndarray, block: str, channels: Optional[int] = None) -> np.ndarray:
    if v.ndim != 4:
        raise ShapeError(f"{block}: expected a C x H x W x Z volume, got shape {v.shape}")
    if channels is not None and v.shape[0] != channels:
        raise ShapeError(f"{block}: expected {channels} channels, got {v.shape[0]}")
    return np.asarray(v, dtype=np.float64)


def check_plane(p: np.ndarray, block: str, channels: Optional[int] = None) -> np.ndarray:
    if p.ndim != 3:
        raise ShapeError(f"{block}: expected a C x H x W plane, got shape {p.shape}")
    if channels is not None and p.shape[0] != channels:
        raise ShapeError(f"{block}: expected {channels} channels, got {p.shape[0]}")
    return np.asarray(p, dtype=np.float64)
