# Runtime settings for the desk detector.
# These are the knobs that change between machines or runs without touching a TOML
# run config: where data lives, how chatty the logs are, the default seed.
# Model / scene / raster hyper-parameters live in domain.run_config instead.

from loguru import logger
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    A Pydantic-based settings class read from SIMPB_* environment variables and a .env file.
    """

    model_config: SettingsConfigDict = SettingsConfigDict(
        env_prefix="SIMPB_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # --- Logging ---
    LOG_LEVEL: str = Field(
        default="INFO", description="loguru level for the stderr sink."
    )

    # --- Filesystem ---
    DATA_DIR: str = Field(
        default="data", description="Directory for generated scene files."
    )
    OUTPUT_DIR: str = Field(
        default="outputs",
        description="Directory for checkpoints, detection dumps and plot CSVs.",
    )

    # --- Reproducibility ---
    DEFAULT_SEED: int = Field(
        default=7, description="Seed used when a command is not given one."
    )

    # --- Evaluation ---
    EVAL_SCORE_THRESHOLD: float = Field(
        default=0.3,
        description="Detections scoring below this are left out of AAR and center-error summaries.",
    )

    @field_validator("LOG_LEVEL", "DATA_DIR", "OUTPUT_DIR")
    @classmethod
    def check_not_empty(cls, value: str, info) -> str:
        if not value or value.strip() == "":
            logger.error(f"The {info.field_name} cannot be empty")
            raise ValueError(f"The {info.field_name} cannot be empty")
        return value

    @field_validator("EVAL_SCORE_THRESHOLD")
    @classmethod
    def check_unit_interval(cls, value: float, info) -> float:
        if not 0.0 <= value <= 1.0:
            logger.error(f"The {info.field_name} must lie in [0, 1], got {value}")
            raise ValueError(f"The {info.field_name} must lie in [0, 1]")
        return value


try:
    settings = Settings()
except Exception as e:
    logger.error(f"Error loading configuration: {e}")
    raise SystemExit(e)
