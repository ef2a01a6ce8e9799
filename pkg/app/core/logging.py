"""
Logger setup (loguru)
"""

import sys
from pathlib import Path
from loguru import logger

from app.core.config import Settings, settings as default_settings


def configure_logging(settings: Settings = default_settings, level: str | None = None) -> None:
    """Replace loguru's default sink with the configured stderr (and optional file) sinks"""
    logger.remove()
    logger.add(
        sys.stderr,
        level=level or settings.LOG_LEVEL,
        format="<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {name}:{function} - {message}",
    )

    if settings.LOG_TO_FILE:
        Path(settings.LOG_DIR).mkdir(parents=True, exist_ok=True)
        logger.add(
            f"{settings.LOG_DIR}/warmstart_gp_{{time}}.log",
            rotation=settings.LOG_ROTATION,
            retention=settings.LOG_RETENTION,
            level="INFO",
        )
