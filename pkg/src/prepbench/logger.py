# logger.py

"""
This module sets up the package logger that outputs log messages to a file.

The logger is set to the DEBUG level, and outputs log messages to a file named debug.log in a directory named logs.
If the logs directory does not exist, it is created, but it should be ignored by git and only stored locally.

The log messages are formatted to include the file name, the date and time, the level of the log message, and the message itself.
Pytest automatically captures the log messages and prints them in the stdout.
"""

import os
import logging
from typing import Optional

PACKAGE_LOGGER_NAME = "prepbench"
LOG_FORMAT = "%(filename)s - %(asctime)s - %(levelname)s - %(message)s"
LOG_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def setup_logger(log_dir: Optional[str] = "logs", level: int = logging.DEBUG, console: bool = False) -> logging.Logger:
    """
    Sets up the `prepbench` logger so that every module logger (`prepbench.<module>`) inherits its handlers.

    A file handler writes to `<log_dir>/debug.log`; the directory is created if missing.
    Pass `log_dir=None` to skip the file handler. With `console=True` a stream handler is attached too.
    Calling the function again does not attach duplicate handlers.
    """
    logger = logging.getLogger(PACKAGE_LOGGER_NAME)
    logger.setLevel(level)
    formatter = logging.Formatter(LOG_FORMAT, datefmt=LOG_DATE_FORMAT)

    if log_dir is not None:
        os.makedirs(log_dir, exist_ok=True)
        log_path = os.path.abspath(os.path.join(log_dir, "debug.log"))
        has_file_handler = any(
            isinstance(handler, logging.FileHandler) and handler.baseFilename == log_path
            for handler in logger.handlers
        )
        if not has_file_handler:
            file_handler = logging.FileHandler(log_path)
            file_handler.setLevel(level)
            file_handler.setFormatter(formatter)
            logger.addHandler(file_handler)

    if console and not any(type(handler) is logging.StreamHandler for handler in logger.handlers):
        stream_handler = logging.StreamHandler()
        stream_handler.setLevel(level)
        stream_handler.setFormatter(formatter)
        logger.addHandler(stream_handler)

    return logger
