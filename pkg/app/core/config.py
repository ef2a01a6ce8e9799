"""
Configuration settings for Warm-Start GP
"""

from pydantic_settings import BaseSettings
from typing import Any, Dict, Optional
from pathlib import Path
from dotenv import dotenv_values


class Settings(BaseSettings):
    """Application settings"""

    # Application
    APP_NAME: str = "Warm-Start GP"
    VERSION: str = "1.0.0"
    ENVIRONMENT: str = "development"
    DEBUG: bool = True
    HOST: str = "0.0.0.0"
    PORT: int = 8000

    # Logging
    LOG_DIR: str = "logs"
    LOG_LEVEL: str = "INFO"
    LOG_TO_FILE: bool = False
    LOG_ROTATION: str = "500 MB"
    LOG_RETENTION: str = "10 days"

    # Numerics
    DENSE_GUARD: int = 20000  # largest n accepted by Cholesky paths
    CG_REFRESH_INTERVAL: int = 50
    DIVERGENCE_NORM: float = 1e12
    MOMENT_CHUNK_TRIALS: int = 1000

    # Experiments
    DEFAULT_SPLITS: int = 10
    DEFAULT_TRAIN_FRACTION: float = 0.9

    class Config:
        env_file = ".env"
        case_sensitive = True
        extra = "forbid"


def load_config_file(path: str | Path) -> Dict[str, Any]:
    """
    Read a flat key=value run configuration file.

    Keys are CLI long-flag names with dashes replaced by underscores.
    Empty values are dropped so that they never shadow CLI defaults.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Config file not found: {path}")

    values: Dict[str, Optional[str]] = dotenv_values(path)
    return {
        key.strip().lower().replace("-", "_"): value.strip()
        for key, value in values.items()
        if value is not None and value.strip() != ""
    }


# Create settings instance
settings = Settings()
