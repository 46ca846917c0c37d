"""
Geometry data model: rigid poses, pinhole cameras and labeled point clouds.
"""

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from models.errors import GridError, ShapeError
from models.grid import UNKNOWN

# Canonical per-point attribute names (positions are held separately).
POINT_FIELDS = ("x", "y", "z", "vx", "vy", "amp", "snr", "t", "class", "conf", "track")
ATTRIBUTE_FIELDS = POINT_FIELDS[3:]

# Fill values used when clouds with different attribute sets are concatenated.
ATTRIBUTE_DEFAULTS = {
    "vx": 0.0, "vy": 0.0, "amp": 0.0, "snr": 0.0, "t": 0.0,
    "class": float(UNKNOWN), "conf": 0.0, "track": -1.0,
}


@dataclass(frozen=True, eq=False)
class RigidPose:
    """SE(3) transform stored as a 4x4 homogeneous matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (4, 4):
            raise ShapeError(f"pose matrix must be 4x4, got {m.shape}")
        r = m[:3, :3]
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-9) or np.linalg.det(r) <= 0:
            raise GridError("pose rotation block is not a proper rotation")
        if not np.allclose(m[3], (0.0, 0.0, 0.0, 1.0), atol=0.0):
            raise GridError("pose last row must be (0, 0, 0, 1)")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "RigidPose":
        return cls(np.eye(4))

    @classmethod
    def from_rt(cls, rotation: np.ndarray, translation) -> "RigidPose":
        m = np.eye(4)
        m[:3, :3] = rotation
        m[:3, 3] = translation
        return cls(m)

    @classmethod
    def from_yaw(cls, yaw: float, translation=(0.0, 0.0, 0.0)) -> "RigidPose":
        c, s = np.cos(yaw), np.sin(yaw)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return cls.from_rt(rot, translation)

    @classmethod
    def from_translation(cls, translation) -> "RigidPose":
        return cls.from_rt(np.eye(3), translation)

    @property
    def rotation(self) -> np.ndarray:
        return self.matrix[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.matrix[:3, 3]

    @property
    def yaw(self) -> float:
        return float(np.arctan2(self.matrix[1, 0], self.matrix[0, 0]))

    def inverse(self) -> "RigidPose":
        rt = self.rotation.T
        return RigidPose.from_rt(rt, -rt @ self.translation)

    def compose(self, right: "RigidPose") -> "RigidPose":
        """self ∘ right: apply `right` first, then `self`."""
        return RigidPose(self.matrix @ right.matrix)

    def __matmul__(self, right: "RigidPose") -> "RigidPose":
        return self.compose(right)

    def apply(self, xyz: np.ndarray) -> np.ndarray:
        return np.asarray(xyz, dtype=np.float64) @ self.rotation.T + self.translation


def relative_pose(world_from_current: RigidPose, world_from_past: RigidPose) -> RigidPose:
    """Transform taking current-frame coordinates into a past frame."""
    return world_from_past.inverse() @ world_from_current


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Zero-skew pinhole camera; extrinsics map ego/world points into the camera frame."""

    name: str
    width: int
    height: int
    intrinsics: np.ndarray
    extrinsics: RigidPose

    def __post_init__(self):
        k = np.asarray(self.intrinsics, dtype=np.float64)
        if k.shape != (3, 3):
            raise ShapeError(f"camera {self.name}: intrinsics must be 3x3, got {k.shape}")
        object.__setattr__(self, "intrinsics", k)
        if self.width <= 0 or self.height <= 0:
            raise GridError(f"camera {self.name}: image size must be positive")
        if self.fx <= 0 or self.fy <= 0:
            raise GridError(f"camera {self.name}: focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise GridError(f"camera {self.name}: principal point outside the image")

    @property
    def fx(self) -> float:
        return float(self.intrinsics[0, 0])

    @property
    def fy(self) -> float:
        return float(self.intrinsics[1, 1])

    @property
    def cx(self) -> float:
        return float(self.intrinsics[0, 2])

    @property
    def cy(self) -> float:
        return float(self.intrinsics[1, 2])


@dataclass(eq=False)
class LabeledPointCloud:
    """
    N points with optional per-point attributes.

    `attrs` maps names from ATTRIBUTE_FIELDS to length-N float64 arrays; the
    class id is stored as float so every attribute shares one dense layout.
    """

    xyz: np.ndarray
    attrs: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.xyz = np.asarray(self.xyz, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(self.xyz)):
            raise GridError("point positions must be finite")
        n = len(self.xyz)
        clean = {}
        for name, values in self.attrs.items():
            if name not in ATTRIBUTE_DEFAULTS:
                raise ShapeError(f"unknown point attribute '{name}'")
            arr = np.asarray(values, dtype=np.float64).reshape(-1)
            if arr.size != n:
                raise ShapeError(f"attribute '{name}' has {arr.size} values for {n} points")
            clean[name] = arr
        if "conf" in clean and clean["conf"].size and (
            clean["conf"].min() < 0.0 or clean["conf"].max() > 1.0
        ):
            raise GridError("confidences must lie in [0, 1]")
        self.attrs = clean

    @classmethod
    def empty(cls, fields: Iterable[str] = ()) -> "LabeledPointCloud":
        return cls(np.zeros((0, 3)), {name: np.zeros(0) for name in fields})

    def __len__(self) -> int:
        return len(self.xyz)

    def has(self, name: str) -> bool:
        return name in self.attrs

    def get(self, name: str) -> np.ndarray:
        """Attribute values, or the fill value for clouds that lack the attribute."""
        if name in self.attrs:
            return self.attrs[name]
        return np.full(len(self), ATTRIBUTE_DEFAULTS[name])

    @property
    def class_ids(self) -> np.ndarray:
        return self.get("class").astype(np.int64)

    @property
    def confidences(self) -> np.ndarray:
        return self.get("conf")

    @property
    def track_ids(self) -> np.ndarray:
        return self.get("track").astype(np.int64)

    def with_xyz(self, xyz: np.ndarray) -> "LabeledPointCloud":
        return LabeledPointCloud(xyz, {k: v.copy() for k, v in self.attrs.items()})

    def with_attrs(self, **updates: np.ndarray) -> "LabeledPointCloud":
        attrs = {k: v.copy() for k, v in self.attrs.items()}
        for name, values in updates.items():
            attrs[name] = np.broadcast_to(np.asarray(values, dtype=np.float64), (len(self),)).copy()
        return LabeledPointCloud(self.xyz.copy(), attrs)

    def subset(self, index) -> "LabeledPointCloud":
        return LabeledPointCloud(self.xyz[index], {k: v[index] for k, v in self.attrs.items()})

    @staticmethod
    def concat(clouds: Iterable["LabeledPointCloud"], fields: Optional[Iterable[str]] = None) -> "LabeledPointCloud":
        """Concatenate clouds; attributes missing from a part get their fill value."""
        clouds = list(clouds)
        if fields is None:
            names = sorted({name for c in clouds for name in c.attrs})
        else:
            names = list(fields)
        if not clouds:
            return LabeledPointCloud.empty(names)
        xyz = np.concatenate([c.xyz for c in clouds], axis=0)
        attrs = {name: np.concatenate([c.get(name) for c in clouds]) for name in names}
        return LabeledPointCloud(xyz, attrs)
