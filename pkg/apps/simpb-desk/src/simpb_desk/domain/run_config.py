# Run configuration: every hyper-parameter of a generate / train / evaluate run.
# A TOML file holds ModelConfig keys at top level plus optional [scene] and [raster]
# tables. Unknown keys are rejected (extra="forbid") so a typo never silently falls back
# to a default.

import math
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from enum import Enum
from pathlib import Path

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..exceptions import ConfigError


class AllocationStrategy(str, Enum):
    UNIFORM = "uniform"
    CENTER = "center"
    CENTER_FRONT_REAR = "center_front_rear"
    CENTER_CORNERS = "center_corners"


class ModelConfig(BaseModel):
    """Model, loss and optimizer hyper-parameters (desk-scale defaults)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    # --- Decoder topology ---
    num_queries: int = Field(default=32, ge=1)
    embed_dims: int = Field(default=64, ge=1)
    num_cameras: int = Field(default=3, ge=1)
    num_classes: int = Field(default=2, ge=1)
    num_layers_2d: int = Field(default=1, ge=0)
    num_layers_3d: int = Field(default=1, ge=0)
    num_hybrid: int = Field(default=3, ge=1)
    total_layers: int | None = Field(
        default=None, description="If set, must equal (num_layers_2d + num_layers_3d) * num_hybrid."
    )
    num_heads: int = Field(default=4, ge=1)
    ffn_ratio: int = Field(default=4, ge=1)
    num_points: int = Field(default=4, ge=1, description="Deformable sampling points per query.")
    temporal_shared_params: bool = Field(
        default=False, description="Share temporal cross-attention weights between 2D and 3D layers."
    )
    merge_post_residual: bool = Field(
        default=True, description="Add a skip around the merge self-attention in aggregation."
    )

    # --- Allocation ---
    allocation_strategy: AllocationStrategy = AllocationStrategy.CENTER_CORNERS
    truncated_cap_per_camera: int = Field(default=100, ge=0)
    anchor_max_lw: float = Field(default=35.0, gt=0)
    anchor_max_h: float = Field(default=10.0, gt=0)

    # --- Heads ---
    default_box_fraction: float = Field(
        default=0.2, gt=0.0, lt=1.0, description="Default 2D box size as a fraction of the image."
    )

    # --- Losses ---
    lambda_alpha: float = Field(default=0.5, ge=0.0)
    focal_alpha: float = Field(default=0.25, ge=0.0, le=1.0)
    focal_gamma: float = Field(default=2.0, ge=0.0)
    loss_weight_cls_2d: float = 2.0
    loss_weight_l1_2d: float = 5.0
    loss_weight_giou_2d: float = 2.0
    loss_weight_cls_3d: float = 2.0
    loss_weight_center: float = 1.0
    loss_weight_size: float = 0.5
    loss_weight_yaw: float = 0.5
    loss_weight_vel: float = 0.2
    aux_supervision: bool = True
    aux_loss_weight: float = Field(default=1.0, ge=0.0)

    # --- Optimisation ---
    learning_rate: float = Field(default=4e-4, ge=0.0)
    weight_decay: float = Field(default=1e-4, ge=0.0)
    adam_beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(default=1e-8, gt=0.0)
    grad_clip_norm: float | None = Field(default=10.0, gt=0.0)
    batch_size: int = Field(default=4, ge=1)
    log_every: int = Field(default=50, ge=1)
    seed: int = Field(default=0, ge=0, description="Parameter initialisation seed.")

    # --- Temporal ---
    top_k_history: int = Field(default=16, ge=0)

    @model_validator(mode="after")
    def check_topology(self) -> "ModelConfig":
        per_block = self.num_layers_2d + self.num_layers_3d
        if per_block == 0:
            raise ValueError("at least one of num_layers_2d / num_layers_3d must be positive")
        expected = per_block * self.num_hybrid
        if self.total_layers is not None and self.total_layers != expected:
            raise ValueError(
                f"total_layers={self.total_layers} violates (L_2d + L_3d) * L_hybrid = {expected}"
            )
        if self.embed_dims % self.num_heads:
            raise ValueError(f"embed_dims={self.embed_dims} is not divisible by num_heads={self.num_heads}")
        if self.num_layers_3d == 0 and not self.aux_supervision:
            raise ValueError("num_layers_3d = 0 requires aux_supervision: nothing would supervise 3D")
        if self.num_layers_3d == 0 and self.num_layers_2d == 0:
            raise ValueError("empty decoder")
        return self

    @property
    def layers_total(self) -> int:
        return (self.num_layers_2d + self.num_layers_3d) * self.num_hybrid


class ClassSpec(BaseModel):
    """Size prior of one synthetic object class (median w, l, h in meters)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str
    size: tuple[float, float, float]
    size_jitter: float = Field(default=0.1, ge=0.0, lt=1.0)
    max_speed: float = Field(default=8.0, ge=0.0)


def _default_classes() -> list[ClassSpec]:
    return [
        ClassSpec(name="car", size=(1.9, 4.6, 1.7)),
        ClassSpec(name="truck", size=(2.6, 8.0, 3.2), max_speed=5.0),
    ]


class SceneGenConfig(BaseModel):
    """Synthetic scene generator settings."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    bev_range: float = Field(default=32.0, gt=0, description="|x|, |y| bound of object centers (m).")
    depth_range: tuple[float, float] = (6.0, 28.0)
    object_count_range: tuple[int, int] = (2, 5)
    classes: list[ClassSpec] = Field(default_factory=_default_classes)
    camera_yaws_deg: list[float] = Field(default_factory=lambda: [-50.0, 0.0, 50.0])
    hfov_deg: float = Field(default=60.0, gt=0, lt=180)
    image_size: tuple[int, int] = (192, 96)
    camera_height: float = 1.5
    require_straddle: bool = True
    max_attempts: int = Field(default=500, ge=1)
    sequence_length: int = Field(default=1, ge=1)
    frame_interval: float = Field(default=0.5, gt=0)
    ego_speed: float = Field(default=5.0, ge=0)
    ego_yaw_rate: float = Field(default=0.05)

    @model_validator(mode="after")
    def check_ranges(self) -> "SceneGenConfig":
        lo, hi = self.object_count_range
        if not 0 <= lo <= hi:
            raise ValueError(f"object_count_range must satisfy 0 <= lo <= hi, got {self.object_count_range}")
        near, far = self.depth_range
        if not 0 < near < far:
            raise ValueError(f"depth_range must satisfy 0 < near < far, got {self.depth_range}")
        if far > self.bev_range * math.sqrt(2.0):
            raise ValueError("depth_range exceeds the BEV range")
        if not self.classes:
            raise ValueError("at least one object class is required")
        if not self.camera_yaws_deg:
            raise ValueError("at least one camera is required")
        return self

    @property
    def num_cameras(self) -> int:
        return len(self.camera_yaws_deg)

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    def has_frustum_overlap(self) -> bool:
        """True when at least two adjacent camera frusta share some azimuths."""

        yaws = sorted(self.camera_yaws_deg)
        return any(b - a < self.hfov_deg for a, b in zip(yaws, yaws[1:]))


class RasterConfig(BaseModel):
    """Feature rasterizer settings (the backbone stand-in)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    patch_size: int = Field(default=8, ge=1)
    coord_channels: bool = True
    depth_reference: float = Field(default=4.0, gt=0, description="Depth (m) that maps to inverse-depth 1.")

    def input_channels(self, num_classes: int) -> int:
        # presence, inverse depth, class one-hot, optional (u, v) coordinates
        return 2 + num_classes + (2 if self.coord_channels else 0)


class RunConfig(BaseModel):
    """Everything a run needs: model + scene generation + rasterization."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    model: ModelConfig = Field(default_factory=ModelConfig)
    scene: SceneGenConfig = Field(default_factory=SceneGenConfig)
    raster: RasterConfig = Field(default_factory=RasterConfig)

    @model_validator(mode="after")
    def check_consistency(self) -> "RunConfig":
        if self.model.num_cameras != self.scene.num_cameras:
            raise ValueError(
                f"model.num_cameras={self.model.num_cameras} but the rig has {self.scene.num_cameras} cameras"
            )
        if self.model.num_classes != self.scene.num_classes:
            raise ValueError(
                f"model.num_classes={self.model.num_classes} but the generator has {self.scene.num_classes} classes"
            )
        W, H = self.scene.image_size
        if W % self.raster.patch_size or H % self.raster.patch_size:
            raise ValueError(f"image_size {self.scene.image_size} is not divisible by patch_size {self.raster.patch_size}")
        return self

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        scene = data.pop("scene", {})
        raster = data.pop("raster", {})
        try:
            return cls(model=ModelConfig(**data), scene=SceneGenConfig(**scene), raster=RasterConfig(**raster))
        except ValidationError as e:
            logger.error(f"Invalid run configuration: {e}")
            raise ConfigError(str(e)) from e

    @classmethod
    def from_file(cls, file_path: Path) -> "RunConfig":
        """Read a RunConfig from a TOML file.

        Raises:
            ConfigError: If the file is missing, is not TOML, or fails validation.
        """
        try:
            data = tomllib.loads(Path(file_path).read_text(encoding="utf-8"))
        except (OSError, tomllib.TOMLDecodeError) as e:
            raise ConfigError(f"cannot read config {file_path}: {e}") from e
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        data = self.model.model_dump(mode="json")
        data["scene"] = self.scene.model_dump(mode="json")
        data["raster"] = self.raster.model_dump(mode="json")
        return data
