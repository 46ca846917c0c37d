"""
Run configuration: one JSON/YAML document covering grid, pseudo-label
thresholds, fusion dimensions, seed, class table and output paths.
"""

from typing import Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from config.settings import settings
from models.errors import ConfigError
from models.fusion import FusionConfig
from models.grid import GRID_PRESETS, GridSpec


class PseudoLabelParams(BaseModel):
    """Thresholds for the pseudo-label stages."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # Noise filter
    knn: int = Field(default=16, ge=3)
    normal_radius: float = Field(default=1.0, gt=0)
    normal_cone_deg: float = Field(default=25.0, ge=0, le=90)
    planarity: float = Field(default=0.1, ge=0)
    plane_tolerance: float = Field(default=0.05, ge=0)
    noise_band: float = Field(default=0.3, ge=0)
    min_neighbors: int = Field(default=4, ge=0)

    # Staged matching
    stage2_radius: float = Field(default=2.0, gt=0)

    # Drivable region
    footprint_margin: float = Field(default=1.5, ge=0)
    ego_ahead: float = Field(default=30.0, gt=0)
    ego_behind: float = Field(default=30.0, gt=0)
    ego_side: float = Field(default=10.0, gt=0)

    # Frames aggregated into one label grid; 0 = every frame in the scene
    window: int = Field(default=0, ge=0)


class FusionSection(BaseModel):
    """Fusion dimensions; H, W and Z come from the fusion grid preset."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    grid_preset: str = "desk"
    channels: int = Field(default=8, ge=1)
    heads: int = Field(default=4, ge=1)
    points: int = Field(default=4, ge=1)
    frames: int = Field(default=3, ge=1)
    num_classes: int = Field(default=12, ge=1)
    gate_layers: int = Field(default=2, ge=1)
    encoder_layers: int = Field(default=2, ge=1)
    bottleneck_layers: int = Field(default=2, ge=1)
    head_layers: int = Field(default=2, ge=1)
    image_stride: int = Field(default=8, ge=1)

    @property
    def grid(self) -> GridSpec:
        return GridSpec.preset(self.grid_preset)

    def to_fusion_config(self) -> FusionConfig:
        h, w, z = self.grid.volume_shape
        fields = self.model_dump(exclude={"grid_preset"})
        return FusionConfig(height=h, width=w, depth=z, **fields)


class IoConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    output_dir: str = Field(default_factory=lambda: settings.output_dir)


class RunConfig(BaseModel):
    """Top-level run configuration. Unknown keys are rejected at every level."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    preset: Optional[str] = "omnihd"
    grid: Optional[GridSpec] = None
    class_table: str = "omnihd"
    seed: int = Field(default_factory=lambda: settings.seed)
    pseudolabel: PseudoLabelParams = Field(default_factory=PseudoLabelParams)
    fusion: FusionSection = Field(default_factory=FusionSection)
    io: IoConfig = Field(default_factory=IoConfig)

    @model_validator(mode="after")
    def _check_nested(self) -> "RunConfig":
        if self.grid is None and self.preset not in GRID_PRESETS:
            raise ValueError(f"unknown grid preset '{self.preset}' (known: {', '.join(GRID_PRESETS)})")
        if self.fusion.grid_preset not in GRID_PRESETS:
            raise ValueError(f"unknown fusion grid preset '{self.fusion.grid_preset}'")
        self.fusion.to_fusion_config()
        return self

    @property
    def grid_spec(self) -> GridSpec:
        """Explicit grid when given, otherwise the named preset."""
        return self.grid if self.grid is not None else GridSpec.preset(self.preset)


class ClassEntry(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    color: tuple[int, int, int] = (255, 255, 255)


def load_run_config(path: Optional[str] = None) -> RunConfig:
    """
    Load and validate a run configuration.

    Args:
        path: JSON or YAML document; the bundled omnihd.json when omitted.

    Returns:
        Validated RunConfig.
    """
    path = path or settings.default_config_path
    with open(path, "r") as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"{path}: not valid JSON/YAML ({e})") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"]) or "<root>"
        raise ConfigError(f"{path}: {where}: {first['msg']}") from None


def load_class_table(name: str, path: Optional[str] = None) -> list[ClassEntry]:
    """Class entries of one named table, index = class id."""
    path = path or settings.class_table_path
    with open(path, "r") as f:
        data = yaml.safe_load(f) or {}
    if name not in data:
        raise ConfigError(f"{path}: no class table named '{name}' (known: {', '.join(data)})")
    try:
        return [ClassEntry.model_validate(entry) for entry in data[name]]
    except ValidationError as e:
        raise ConfigError(f"{path}: class table '{name}': {e.errors()[0]['msg']}") from None


def class_names(table: list[ClassEntry], num_classes: int) -> list[str]:
    """Names for ids 0..num_classes-1; ids past the table get 'class_<id>'."""
    return [table[i].name if i < len(table) else f"class_{i}" for i in range(num_classes)]
