import glob
import logging
import os

import pytest

from core.logging_config import KEEP_LOGS, cleanup_old_logs, configure_logging


def _files(log_type):
    return glob.glob(os.path.join(os.environ['CORRUGATE_LOG_DIR'], log_type, f"{log_type}_*.log"))


def _flush(name):
    for handler in logging.getLogger(name).handlers:
        handler.flush()


def test_solver_messages_get_their_own_file():
    configure_logging('corrugate', 'cli')
    logging.getLogger('corrugate.elliptic').info("poisson solve finished")
    _flush('corrugate.elliptic')
    _flush('corrugate')
    solver_files = _files('solver')
    assert len(solver_files) == 1
    with open(solver_files[0]) as f:
        assert 'poisson solve finished' in f.read()
    with open(_files('cli')[0]) as f:
        assert 'poisson solve finished' in f.read()


def test_other_children_stay_in_the_entry_point_file():
    configure_logging('corrugate', 'run')
    logging.getLogger('corrugate.stages').info("stage finished")
    _flush('corrugate')
    _flush('corrugate.elliptic')
    with open(_files('run')[0]) as f:
        assert 'stage finished' in f.read()
    with open(_files('solver')[0]) as f:
        assert 'stage finished' not in f.read()


def test_unknown_log_type_is_rejected():
    with pytest.raises(ValueError, match='Unknown log type'):
        configure_logging('corrugate', 'metrics')


def test_cleanup_keeps_the_newest_files():
    log_dir = os.path.join(os.environ['CORRUGATE_LOG_DIR'], 'solver')
    os.makedirs(log_dir)
    for i in range(KEEP_LOGS + 3):
        path = os.path.join(log_dir, f"solver_20260101_0000{i:02d}.log")
        with open(path, 'w') as f:
            f.write('x')
        os.utime(path, (1_000_000 + i, 1_000_000 + i))
    cleanup_old_logs('solver')
    assert len(_files('solver')) == KEEP_LOGS
