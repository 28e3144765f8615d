"""
Logging setup for the toolkit
"""
import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional


def setup_logging(verbose: bool = False, log_file: Optional[str] = "log/adaem.log",
                  level: str = "INFO") -> None:
    """
    Setup application logging

    Args:
        verbose: Enable verbose (DEBUG) logging; overrides level
        log_file: Path to the rotating log file, None to log to the console only
        level: Level name used when not verbose
    """
    log_level = logging.DEBUG if verbose else getattr(logging, str(level).upper(), logging.INFO)

    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)
    root_logger.handlers.clear()

    # Only warnings and errors reach the console; rich output is for results
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(logging.WARNING)
    console_handler.setFormatter(logging.Formatter('%(levelname)s: %(message)s'))
    root_logger.addHandler(console_handler)

    if log_file:
        try:
            log_path = Path(log_file)
            log_path.parent.mkdir(parents=True, exist_ok=True)
            file_handler = RotatingFileHandler(
                log_path,
                maxBytes=10*1024*1024,  # 10MB
                backupCount=5
            )
            file_handler.setLevel(log_level)
            file_handler.setFormatter(formatter)
            root_logger.addHandler(file_handler)
        except OSError as e:
            print(f"Warning: Could not setup file logging: {e}", file=sys.stderr)

    for noisy in ('joblib', 'asyncio'):
        logging.getLogger(noisy).setLevel(logging.WARNING)

    if verbose and log_file:
        print(f"Logging setup complete. Log file: {log_file}", file=sys.stderr)
