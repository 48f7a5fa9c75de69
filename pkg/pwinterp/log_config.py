"""Logging configuration for the toolkit and its command line."""
import logging
import logging.config
import os
from pathlib import Path
from typing import Any, Dict, Optional


def default_log_dir() -> Path:
    """Log directory from PWINTERP_LOG_DIR, or <project>/logs."""
    env_dir = os.getenv("PWINTERP_LOG_DIR")
    if env_dir:
        return Path(env_dir).expanduser().resolve()
    return Path(__file__).resolve().parent.parent / "logs"


def build_log_config(level: str = "INFO", log_dir: Optional[Path] = None) -> Dict[str, Any]:
    """Build the dictConfig mapping for console and rotating-file logging."""
    log_dir = log_dir or default_log_dir()
    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "standard": {
                "format": "%(asctime)s | %(name)s | %(levelname)s | %(message)s",
            },
        },
        "handlers": {
            "console": {
                "class": "logging.StreamHandler",
                "formatter": "standard",
                "level": level,
            },
            "application_file": {
                "class": "logging.handlers.RotatingFileHandler",
                "formatter": "standard",
                "level": "DEBUG",
                "filename": str(log_dir / "pwinterp.log"),
                "maxBytes": 10 * 1024 * 1024,  # 10 MB
                "backupCount": 5,
            },
        },
        "loggers": {
            "": {  # root logger
                "handlers": ["console"],
                "level": level,
            },
            "pwinterp": {
                "handlers": ["console", "application_file"],
                "level": "DEBUG",
                "propagate": False,
            },
        },
    }


LOG_CONFIG = build_log_config()


def configure_logging(level: str = "INFO", log_dir: Optional[Path] = None) -> Path:
    """Apply the logging configuration; returns the directory holding the log file."""
    log_dir = log_dir or default_log_dir()
    log_dir.mkdir(parents=True, exist_ok=True)
    logging.config.dictConfig(build_log_config(level.upper(), log_dir))
    logging.getLogger(__name__).debug(f"Logging configured at {level}, files in {log_dir}")
    return log_dir


__all__ = ["LOG_CONFIG", "build_log_config", "configure_logging", "default_log_dir"]
