"""
Centralized configuration management using Pydantic.
Loads environment variables and validates simulator settings.
"""

from pathlib import Path
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# Get the project root directory (parent of config folder)
PROJECT_ROOT = Path(__file__).parent.parent
ENV_FILE = PROJECT_ROOT / ".env"


class Settings(BaseSettings):
    """Environment-level settings loaded from environment variables."""

    # Output
    output_dir: str = Field(default="./output", alias="SPDC_OUTPUT_DIR")

    # Execution
    workers: int = Field(default=4, alias="SPDC_WORKERS")
    strict: bool = Field(default=False, alias="SPDC_STRICT")
    kernel_cache_size: int = Field(default=64, alias="SPDC_KERNEL_CACHE_SIZE")

    # Logging
    log_level: str = Field(default="INFO", alias="SPDC_LOG_LEVEL")
    log_to_file: bool = Field(default=False, alias="SPDC_LOG_TO_FILE")
    log_dir: str = Field(default="./logs", alias="SPDC_LOG_DIR")

    model_config = SettingsConfigDict(
        env_file=str(ENV_FILE),
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )

    @field_validator("workers")
    @classmethod
    def validate_workers(cls, v: int) -> int:
        """Ensure at least one worker."""
        if v < 1:
            raise ValueError("Worker count must be at least 1")
        return v

    @field_validator("kernel_cache_size")
    @classmethod
    def validate_cache_size(cls, v: int) -> int:
        """Ensure the kernel cache can hold at least one entry."""
        if v < 1:
            raise ValueError("Kernel cache size must be at least 1")
        return v

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Ensure the log level is a standard logging level name."""
        level = v.upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"Unknown log level: {v}")
        return level


# Global settings instance
settings = Settings()
