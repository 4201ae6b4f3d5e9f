from dataclasses import dataclass

from ...domain import ModelConfig, RunConfig
from ...exceptions import ConfigError


@dataclass(frozen=True)
class AttentionConfig:
    """Shape of every attention block in the decoder.

    Attributes:
        embed_dims: C.
        num_heads: Heads of the dense attentions (C must divide evenly).
        num_points: P, deformable samples per query.
        stride: Image pixels per feature-map cell.
        num_levels: Feature-map scales; single-scale only.
    """

    embed_dims: int
    num_heads: int = 4
    num_points: int = 4
    stride: int = 8
    num_levels: int = 1

    def __post_init__(self) -> None:
        if self.embed_dims % self.num_heads:
            raise ConfigError(f"embed_dims={self.embed_dims} is not divisible by num_heads={self.num_heads}")
        if self.num_points < 1:
            raise ConfigError("num_points must be >= 1")
        if self.num_levels != 1:
            raise ConfigError("only single-scale feature maps are supported")

    @classmethod
    def from_run_config(cls, run: RunConfig) -> "AttentionConfig":
        model: ModelConfig = run.model
        return cls(
            embed_dims=model.embed_dims,
            num_heads=model.num_heads,
            num_points=model.num_points,
            stride=run.raster.patch_size,
        )
