from __future__ import annotations

from functools import lru_cache
from typing import Literal

from pydantic import AliasChoices, Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    app_name: str = "soccer-event-detection"
    app_env: str = Field(
        default="production",
        validation_alias=AliasChoices("APP_ENV", "app_env"),
        description="Runtime environment: development|production.",
    )

    seed: int = Field(
        default=0,
        ge=0,
        validation_alias=AliasChoices("SOCCER_SEED", "seed"),
        description="Global default seed; every stochastic component derives sub-seeds from it.",
    )
    train_dtype: Literal["float32", "float64"] = Field(
        default="float32",
        validation_alias=AliasChoices("SOCCER_TRAIN_DTYPE", "train_dtype"),
        description="Numeric precision used for training (gradient checks always use float64).",
    )
    metrics_textfile: str | None = Field(
        default=None,
        validation_alias=AliasChoices("SOCCER_METRICS_TEXTFILE", "metrics_textfile"),
        description="If set, CLI commands write the prometheus registry here when they finish.",
    )
    data_dir: str = Field(
        default="./data",
        validation_alias=AliasChoices("SOCCER_DATA_DIR", "data_dir"),
        description="Default root for generated datasets, checkpoints and reports.",
    )

    @property
    def is_development(self) -> bool:
        return str(self.app_env).strip().lower() == "development"


@lru_cache
def get_settings() -> Settings:
    return Settings()
