import math

import numpy as np
import pytest

from core.decomp import build_frame
from core.field import Grid, make_domain
from core.scheduler import Schedule
from core.stages import StageOptions


@pytest.fixture(autouse=True)
def isolated_environment(tmp_path, monkeypatch):
    """Log files and configuration lookups stay inside the test's temporary directory"""
    monkeypatch.setenv('CORRUGATE_LOG_DIR', str(tmp_path / 'logs'))
    monkeypatch.delenv('CORRUGATE_CONFIG', raising=False)
    monkeypatch.setenv('CORRUGATE_THREADS', '2')


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def square_grid():
    return Grid.build(make_domain('square', 2), 32, 0.25)


@pytest.fixture
def disc_grid():
    return Grid.build(make_domain('disc', 2), 64, 0.1)


@pytest.fixture(scope='session')
def frame2():
    return build_frame(2)


@pytest.fixture(scope='session')
def frame3():
    return build_frame(3)


def desk_schedule(q_max=1):
    """a=10, b=1.5, c=0.9: λ₀≈7.9, λ₁≈22.4, δ₁≈0.032, δ₂≈0.0056"""
    return Schedule(log_a=math.log(10.0), b=1.5, c=0.9, alpha=0.05, sigma=0.18, K=1.5,
                    C_universal=1000.0, q_max=q_max, n=2)


@pytest.fixture
def desk():
    return desk_schedule()


@pytest.fixture
def desk_options():
    return StageOptions(points_per_period=4, strict=False, verify_count=6)


@pytest.fixture(scope='session')
def desk_square_grid():
    return Grid.build(make_domain('square', 2), 96, 0.1)


@pytest.fixture(scope='session')
def desk_disc_grid():
    return Grid.build(make_domain('disc', 2), 192, 0.1)
