import logging
import sys

from app.config import settings


def configure_logging(level: str | int | None = None) -> None:
    """Routes every library logger to standard error."""
    logging.basicConfig(
        level=level or settings.LOG_LEVEL,
        format=settings.LOG_FORMAT,
        stream=sys.stderr,
        force=True,
    )
