"""
Logging setup for the BLRS regression engine.
Creates daily log files in plain text format plus a console handler on stderr.

Standard output is left alone: the CLI prints its results there and those
must stay byte-identical between runs.
"""

import logging
import os
from datetime import datetime

LOGGER_NAME = "blrs"

_FORMAT = "%(asctime)s | %(levelname)-8s | %(message)s"


def setup_logger(log_dir: str, console_level: int = logging.INFO) -> logging.Logger:
    """Set up and return the application logger with one log file per day.

    Safe to call multiple times in one process (the CLI tests call main()
    repeatedly):
    - If today's FileHandler is already attached, returns immediately.
    - If a FileHandler for another day or another directory is attached,
      closes it and opens today's file in log_dir.
    """
    os.makedirs(log_dir, exist_ok=True)

    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(logging.DEBUG)

    today = datetime.now().strftime("%Y-%m-%d")
    log_file = os.path.abspath(os.path.join(log_dir, f"blrs-{today}.log"))

    for h in list(logger.handlers):
        if isinstance(h, logging.FileHandler):
            if h.baseFilename == log_file:
                return logger
            h.close()
            logger.removeHandler(h)

    file_handler = logging.FileHandler(log_file, encoding="utf-8")
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(logging.Formatter(_FORMAT, datefmt="%Y-%m-%d %H:%M:%S"))
    logger.addHandler(file_handler)

    # Exact type check: FileHandler is a StreamHandler subclass.
    if not any(type(h) is logging.StreamHandler for h in logger.handlers):
        console_handler = logging.StreamHandler()
        console_handler.setLevel(console_level)
        console_handler.setFormatter(logging.Formatter(_FORMAT, datefmt="%H:%M:%S"))
        logger.addHandler(console_handler)

    return logger
