"""
Scene data model: annotated boxes, ingested segmentation masks, drivable
regions and the per-scene bundle the pseudo-label pipeline consumes.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from models.errors import ShapeError
from models.geometry import CameraModel, LabeledPointCloud, RigidPose


class Box3D(BaseModel):
    """Annotated 3D bounding box, yawed about +Z."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    id: int
    track_id: int
    class_id: int = Field(ge=0, le=254)
    center: tuple[float, float, float]
    size: tuple[float, float, float] = Field(description="(length, width, height) in meters")
    yaw: float = 0.0
    frame_id: int

    @field_validator("size")
    @classmethod
    def _positive_size(cls, size):
        if min(size) <= 0:
            raise ValueError(f"box size must be positive, got {size}")
        return size

    @property
    def pose(self) -> RigidPose:
        """Box frame → frame the box is annotated in."""
        return RigidPose.from_yaw(self.yaw, self.center)

    @property
    def half_extents(self) -> np.ndarray:
        return np.asarray(self.size, dtype=np.float64) / 2.0

    def to_local(self, xyz: np.ndarray) -> np.ndarray:
        return self.pose.inverse().apply(xyz)

    def contains(self, xyz: np.ndarray) -> np.ndarray:
        """Closed-interval membership test for an (N, 3) array."""
        local = self.to_local(xyz)
        return np.all(np.abs(local) <= self.half_extents, axis=1)


@dataclass(eq=False)
class SemanticMask:
    """Per-pixel class id and confidence for one camera image."""

    camera: str
    classes: np.ndarray
    confidences: np.ndarray

    def __post_init__(self):
        self.classes = np.asarray(self.classes, dtype=np.uint8)
        self.confidences = np.asarray(self.confidences, dtype=np.float64)
        if self.classes.ndim != 2 or self.classes.shape != self.confidences.shape:
            raise ShapeError(
                f"mask {self.camera}: class/confidence arrays must share one 2D shape, "
                f"got {self.classes.shape} and {self.confidences.shape}"
            )

    @property
    def width(self) -> int:
        return int(self.classes.shape[1])

    @property
    def height(self) -> int:
        return int(self.classes.shape[0])

    def check_camera(self, cam: CameraModel) -> None:
        if (self.width, self.height) != (cam.width, cam.height):
            raise ShapeError(
                f"mask {self.camera} is {self.width}x{self.height}, "
                f"camera {cam.name} is {cam.width}x{cam.height}"
            )


@dataclass(frozen=True)
class Rect:
    """Yawed rectangle in the ground plane."""

    cx: float
    cy: float
    half_length: float
    half_width: float
    yaw: float = 0.0

    def contains(self, xy: np.ndarray) -> np.ndarray:
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        dx = xy[:, 0] - self.cx
        dy = xy[:, 1] - self.cy
        along = c * dx + s * dy
        across = -s * dx + c * dy
        return (np.abs(along) <= self.half_length) & (np.abs(across) <= self.half_width)


@dataclass(frozen=True)
class DrivableRegion:
    """Union of rectangles in the ego frame."""

    rects: tuple[Rect, ...]

    def __post_init__(self):
        if not self.rects:
            raise ShapeError("drivable region needs at least one rectangle")

    def contains(self, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, dtype=np.float64)
        xy = xy.reshape(-1, xy.shape[-1])[:, :2]
        inside = np.zeros(len(xy), dtype=bool)
        for rect in self.rects:
            inside |= rect.contains(xy)
        return inside


@dataclass(eq=False)
class ObjectPoints:
    """Points of one annotated box in one frame."""

    box: Box3D
    points: LabeledPointCloud


@dataclass(eq=False)
class SceneData:
    """Everything a scene directory holds, keyed by frame id (chronological order)."""

    frames: list[int]
    poses: dict[int, RigidPose]
    cameras: list[CameraModel]
    boxes: dict[int, list[Box3D]] = field(default_factory=dict)
    lidar: dict[int, LabeledPointCloud] = field(default_factory=dict)
    masks: dict[int, dict[str, SemanticMask]] = field(default_factory=dict)
    radar: dict[int, LabeledPointCloud] = field(default_factory=dict)

    @property
    def current_frame(self) -> int:
        return self.frames[-1]

    def camera(self, name: str) -> Optional[CameraModel]:
        return next((c for c in self.cameras if c.name == name), None)
