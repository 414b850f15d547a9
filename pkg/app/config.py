# app/config.py
import difflib
import os
from pathlib import Path
from typing import Any, ClassVar, Optional

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.exceptions import ConfigError


class Settings(BaseSettings):
    # Data limits
    DENSE_CELL_CAP: int = 100_000_000
    DEFAULT_RATING_SCALE: tuple[float, float] = (1.0, 5.0)
    DEFAULT_NEG_RATIO: float = 3.0

    # Reproducibility
    DEFAULT_SEED: int = 42

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(levelname)s %(name)s: %(message)s"

    # Numerical settings
    SVD_MAX_SWEEPS: int = 100
    SVD_TOLERANCE: float = 1e-12
    STACK_RIDGE: float = 1e-8

    # Model files
    MODEL_FORMAT_VERSION: int = 1

    # Determine which .env file to load
    if os.getenv("TESTING"):
        use_env_file: ClassVar = ".env.test"
    else:
        use_env_file: ClassVar = ".env"

    model_config = SettingsConfigDict(
        env_file=use_env_file, env_prefix="RECOFACTOR_", extra="ignore"
    )


# Create a single, reusable instance of the settings
settings = Settings()


class RunConfig(BaseModel):
    """Every option a command accepts, as read from a key=value file or flags.

    Keys are the long flag names with dashes turned into underscores.
    """

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    input: Optional[str] = None
    output: Optional[str] = None
    algo: Optional[str] = None
    feedback: str = "explicit"
    scale: Optional[str] = None
    header: bool = False
    factors: int = Field(default=10, ge=1)
    alpha: float = Field(default=0.01, gt=0)
    reg: float = Field(default=0.02, ge=0, alias="lambda")
    epochs: int = Field(default=20, ge=1)
    seed: Optional[int] = None
    optimizer: str = "sgd"
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    epsilon: float = Field(default=1e-8, gt=0)
    impute: str = "user"
    rank_rule: str = "energy:0.95"
    similarity_mode: str = "paper-dot"
    neighborhood: Optional[int] = Field(default=None, ge=1)
    neg_ratio: Optional[float] = Field(default=None, gt=0)
    loss: Optional[str] = None
    update_order: str = "sequential"
    strategy: str = "all_features"
    holdout: Optional[float] = Field(default=None, gt=0, lt=1)

    @classmethod
    def known_keys(cls) -> list[str]:
        keys = []
        for name, field in cls.model_fields.items():
            keys.append(field.alias or name)
        return keys


def read_config_file(path: str | Path) -> dict[str, str]:
    """Reads a flat key=value file, rejecting keys RunConfig does not know."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values = {key: value for key, value in dotenv_values(path).items()}
    known = RunConfig.known_keys()
    for key in values:
        if key not in known:
            suggestion = difflib.get_close_matches(key, known, n=1)
            hint = f"; did you mean '{suggestion[0]}'?" if suggestion else ""
            raise ConfigError(f"unknown config key '{key}'{hint}")
    return values


def build_run_config(
    file_values: dict[str, Any] | None, flag_values: dict[str, Any]
) -> RunConfig:
    """Merges config-file values with flags; flags that were given win."""
    merged: dict[str, Any] = dict(file_values or {})
    for key, value in flag_values.items():
        if value is not None:
            merged["lambda" if key == "reg" else key] = value
    merged = {key: value for key, value in merged.items() if value not in ("", None)}
    try:
        return RunConfig.model_validate(merged)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise ConfigError(f"invalid value for '{location}': {first['msg']}") from e
