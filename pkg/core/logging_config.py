"""
Logging setup for corrugate entry points

Entry points configure the 'corrugate' logger once; numerical modules only ask
for children of it and inherit the console and file handlers.
"""

import os
import json
import logging
from datetime import datetime

from .utils import json_default, rotate_files

LOG_TYPES = ('run', 'solver', 'cli', 'general')

# One file per process and log type
STARTED = datetime.now().strftime('%Y%m%d_%H%M%S')

FILE_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(filename)s:%(lineno)d - %(message)s'
CONSOLE_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
KEEP_LOGS = 5

# Children that also write to a file of their own log type
ROUTED = {'corrugate.elliptic': 'solver'}


def get_logs_dir():
    """Base log directory, relocatable through CORRUGATE_LOG_DIR"""
    default = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'logs')
    return os.environ.get('CORRUGATE_LOG_DIR', default)


def get_log_path(log_type):
    """File of this process for a log type; creates the directory"""
    log_dir = os.path.join(get_logs_dir(), log_type)
    os.makedirs(log_dir, exist_ok=True)
    return os.path.join(log_dir, f"{log_type}_{STARTED}.log")


def cleanup_old_logs(log_type, max_logs=KEEP_LOGS):
    """
    Prune a log type's directory to its newest files

    Args:
        log_type (str): One of LOG_TYPES
        max_logs (int): Files to keep
    """
    log_dir = os.path.join(get_logs_dir(), log_type)
    if os.path.isdir(log_dir):
        rotate_files(log_dir, f"{log_type}_*.log", max_files=max_logs)


def _attach(logger, handler, level, fmt):
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(fmt))
    logger.addHandler(handler)
    return handler


def _route(name, log_type, level):
    child = logging.getLogger(name)
    for handler in list(child.handlers):
        handler.close()
        child.removeHandler(handler)
    cleanup_old_logs(log_type)
    _attach(child, logging.FileHandler(get_log_path(log_type)), level, FILE_FORMAT)


def configure_logging(module_name, log_type=None, console_level=logging.INFO, file_level=logging.DEBUG):
    """
    Attach a console handler and a timestamped file handler to a logger

    Calling it again replaces the handlers, so repeated CLI invocations in one
    process (the test suite) do not stack output.
    Children listed in ROUTED also get a file of their own log type and keep
    propagating to the parent handlers.

    Args:
        module_name (str): Logger name, usually 'corrugate'
        log_type (str, optional): One of LOG_TYPES; 'general' when omitted
        console_level (int, optional): Console threshold
        file_level (int, optional): File threshold

    Returns:
        logging.Logger: The configured logger
    """
    log_type = log_type or 'general'
    if log_type not in LOG_TYPES:
        raise ValueError(f"Unknown log type '{log_type}', expected one of {LOG_TYPES}")

    cleanup_old_logs(log_type)

    logger = logging.getLogger(module_name)
    logger.setLevel(logging.DEBUG)
    for handler in list(logger.handlers):
        handler.close()
        logger.removeHandler(handler)

    _attach(logger, logging.StreamHandler(), console_level, CONSOLE_FORMAT)
    log_file = get_log_path(log_type)
    _attach(logger, logging.FileHandler(log_file), file_level, FILE_FORMAT)

    for child, child_type in ROUTED.items():
        if child.startswith(module_name + '.'):
            _route(child, child_type, file_level)

    logger.debug(f"Logging for {module_name} goes to {log_file}")
    return logger


def get_logger(module_name, log_type=None):
    """Configured logger for an entry point; see configure_logging"""
    return configure_logging(module_name, log_type)


def log_stage_record(logger, record, jsonl_path=None):
    """
    Emit one stage record as a JSON log line and optionally append it to a file

    Args:
        logger (logging.Logger): Destination logger
        record (dict): JSON-serializable stage record
        jsonl_path (str, optional): File receiving one record per line
    """
    line = json.dumps(record, sort_keys=True, default=json_default)
    logger.info(line)
    if jsonl_path:
        with open(jsonl_path, 'a') as f:
            f.write(line + '\n')
