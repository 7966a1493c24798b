"""
Logger factory shared by every module.
"""
import logging
import os

from config.hwt_config import LOG_FILE

LOG_FORMAT = 'time:%(asctime)s,name:,%(name)s,levelname:%(levelname)s,message:%(message)s'


def get_logger(name: str, log_file: str = LOG_FILE) -> logging.Logger:
    """
    Returns a DEBUG-level logger writing to ``log_file`` and to stderr.

    Handlers are only attached the first time a name is requested, so repeated
    imports do not duplicate log lines. The stream handler stays at WARNING to
    keep command output clean.

    Args:
        name (str): Logger name, normally the calling module's ``__name__``.
        log_file (str): Path of the log file. Its directory is created if missing.

    Returns:
        logging.Logger: The configured logger.
    """
    logger = logging.getLogger(name)
    if logger.handlers:
        return logger
    logger.setLevel(logging.DEBUG)

    formatter = logging.Formatter(LOG_FORMAT)

    log_dir = os.path.dirname(log_file)
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
    file_handler = logging.FileHandler(log_file)
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(formatter)

    stream_handler = logging.StreamHandler()
    stream_handler.setLevel(logging.WARNING)
    stream_handler.setFormatter(formatter)

    logger.addHandler(file_handler)
    logger.addHandler(stream_handler)
    return logger
