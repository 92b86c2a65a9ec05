from pydantic_settings import BaseSettings
from pydantic import Field
from functools import lru_cache
from typing import Literal


class Settings(BaseSettings):
    """Settings that read from .env file and environment variables"""

    # Application Settings
    app_name: str = Field(
        default="mcs-integrity",
        description="Application name"
    )
    app_version: str = Field(
        default="1.0.0",
        description="Application version"
    )
    debug: bool = Field(
        default=False,
        description="Enable debug mode (console log rendering, debug level)"
    )

    # Logging
    log_level: str = Field(
        default="INFO",
        description="Log level for engine diagnostics (written to stderr)"
    )
    log_json: bool = Field(
        default=False,
        description="Render log events as JSON instead of console lines"
    )

    # Equilibrium search
    fast_path: bool = Field(
        default=True,
        description="Solve positive components of singleton monotone logics by least fixpoint when no belief can support itself"
    )
    max_unbounded_heads: int = Field(
        default=20,
        ge=0,
        description="Guessed ground heads allowed before an explicit limit is mandatory"
    )
    max_herbrand_base: int = Field(
        default=16,
        ge=0,
        description="Largest Herbrand base a 'models' context may enumerate"
    )
    acc_cache_size: int = Field(
        default=4096,
        ge=0,
        description="Entries kept in the ACC memo (0 disables caching)"
    )

    # Constraints and repair
    default_mode: Literal["weak", "strong"] = Field(
        default="weak",
        description="Satisfaction mode used when none is given"
    )
    default_repair_size: int = Field(
        default=2,
        ge=0,
        description="Largest update set tried by repair search unless overridden"
    )

    # Output
    output_schema_version: str = Field(
        default="1",
        description="Version stamped into structured (JSON) output"
    )

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"
        case_sensitive = False  # LOG_LEVEL or log_level both work
        extra = "ignore"


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance"""
    return Settings()
