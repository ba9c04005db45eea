"""
Logging configuration.

Plain formatted logs for interactive use; JSON structured logs (via
python-json-logger) when LOG_FORMAT=json or ENVIRONMENT=production.
Logs always go to stderr so stdout carries only command output.
"""

import logging
import logging.config
import os
from typing import Optional

from dotenv import load_dotenv

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s %(message)s"


def _wants_json(log_format: Optional[str]) -> bool:
    if log_format:
        return log_format.lower() == "json"
    if os.getenv("LOG_FORMAT"):
        return os.getenv("LOG_FORMAT", "").lower() == "json"
    return os.getenv("ENVIRONMENT") == "production"


def configure_logging(
    level: Optional[str] = None, log_format: Optional[str] = None
) -> None:
    """
    Install the root logging configuration.

    Args:
        level: Log level name (defaults to LOG_LEVEL env var, then INFO)
        log_format: "json" or "text" (defaults to LOG_FORMAT / ENVIRONMENT)
    """
    load_dotenv()
    level = (level or os.getenv("LOG_LEVEL", "INFO")).upper()
    use_json = _wants_json(log_format)

    config = {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "json": {
                "format": LOG_FORMAT,
                "class": "pythonjsonlogger.json.JsonFormatter",
            },
            "default": {"format": LOG_FORMAT},
        },
        "handlers": {
            "console": {
                "class": "logging.StreamHandler",
                "formatter": "json" if use_json else "default",
                "stream": "ext://sys.stderr",
            },
        },
        "root": {"level": level, "handlers": ["console"]},
    }

    try:
        logging.config.dictConfig(config)
    except (ImportError, ValueError):
        # Older python-json-logger releases only ship the jsonlogger module
        config["formatters"]["json"]["class"] = (
            "pythonjsonlogger.jsonlogger.JsonFormatter"
        )
        logging.config.dictConfig(config)
