"""
Logging configuration for the simulator.
"""

import logging
import sys
from pathlib import Path
from config.settings import settings


def setup_logging() -> logging.Logger:
    """
    Set up logging configuration.

    Returns:
        Configured logger instance
    """
    # Configure logging format
    log_format = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    date_format = "%Y-%m-%d %H:%M:%S"

    handlers = [logging.StreamHandler(sys.stdout)]
    if settings.log_to_file:
        log_dir = Path(settings.log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_dir / "spdc_imaging.log"))

    # Configure root logger
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper()),
        format=log_format,
        datefmt=date_format,
        handlers=handlers
    )

    logger = logging.getLogger("spdc_imaging")
    return logger


# Global logger instance
logger = setup_logging()
