"""
Utility functions for the corrugate package
"""

import os
import glob
import logging

import numpy as np

# Configure logger
logger = logging.getLogger('corrugate.utils')


def rotate_files(directory, pattern, max_files=5):
    """
    Keep only the newest files matching a pattern in a directory.

    Args:
        directory (str): Directory to prune
        pattern (str): Glob pattern of the files, e.g. 'run_*.log'
        max_files (int): Number of files to keep

    Returns:
        list: Paths that were removed
    """
    files = glob.glob(os.path.join(directory, pattern))
    if len(files) <= max_files:
        return []

    # Newest first
    files.sort(key=os.path.getmtime, reverse=True)
    removed = []
    for old_file in files[max_files:]:
        try:
            os.remove(old_file)
            removed.append(old_file)
        except OSError as e:
            logger.warning(f"Error removing {old_file}: {e}")
    return removed


def thread_count():
    """
    Number of worker threads, capped by the CORRUGATE_THREADS environment variable

    Returns:
        int: Thread count (at least 1)
    """
    cap = os.environ.get('CORRUGATE_THREADS')
    default = os.cpu_count() or 1
    if cap is None or cap.strip() == '':
        return default
    try:
        return max(1, int(cap))
    except ValueError:
        logger.warning(f"Ignoring non-integer CORRUGATE_THREADS={cap!r}")
        return default


def make_rng(seed):
    """Seeded numpy generator; every random draw in a run goes through one of these"""
    return np.random.default_rng(seed)


def format_float(value, digits=6):
    """
    Format a float for tables and log lines

    Args:
        value (float): Value to format
        digits (int): Significant digits

    Returns:
        str: Formatted value ('inf', 'nan' kept readable)
    """
    if value is None:
        return '-'
    if not np.isfinite(value):
        return str(value)
    return f"{value:.{digits}g}"


def json_default(obj):
    """``default`` hook for json.dump covering numpy scalars and arrays"""
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, (set, tuple)):
        return list(obj)
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")
