"""
Logger module.

Sets up the tagged "[LEVEL] message" log lines on stderr.
"""

import logging
import sys

from config import LOG_LEVEL

LOG_FORMAT = "[%(levelname)s] %(message)s"


def setup_logging(level: str = LOG_LEVEL) -> None:
    """
    Configure the root logger once for the CLI.

    Args:
        level: Level name such as "INFO" or "DEBUG"
    """
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(level.upper())


def progress_enabled() -> bool:
    """Progress bars are shown only when INFO messages would be."""
    return logging.getLogger().isEnabledFor(logging.INFO)
