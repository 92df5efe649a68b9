import json
import math

import numpy as np
import pytest

from config import DEFAULT_CONFIG, Config, FieldSpec, RunConfig
from core.errors import ConfigError
from core.presets import make_preset
from core.scheduler import Schedule


def _run_config(**overrides):
    cfg = Config(DEFAULT_CONFIG)
    for key, value in overrides.items():
        cfg.set(key, value)
    return RunConfig.from_config(cfg)


def test_defaults_are_typed():
    run = _run_config()
    assert run.n == 2 and run.mode == 'interior'
    assert run.resolution == 128 and isinstance(run.resolution, int)
    assert run.strict is True
    assert run.f == FieldSpec('constant', {'value': 1.0})
    assert not run.explicit_schedule


def test_parse_error_reports_its_line():
    cfg = Config()
    with pytest.raises(ConfigError) as info:
        cfg.parse_text("n=2\nthis line is bad\n")
    assert info.value.line == 2


def test_key_without_value_is_rejected():
    with pytest.raises(ConfigError, match="Missing '='") as info:
        Config().parse_text("# comment\norphan\n")
    assert info.value.key == 'orphan'
    assert info.value.line == 2


def test_key_value_file_keeps_line_numbers(tmp_path):
    path = tmp_path / 'run.cfg'
    path.write_text("# interior run\nmode=interior\ngrid.resolution=lots\n")
    cfg = Config(DEFAULT_CONFIG, str(path))
    assert cfg.line_of('grid.resolution') == 3
    with pytest.raises(ConfigError) as info:
        RunConfig.from_config(cfg)
    assert info.value.key == 'grid.resolution'
    assert info.value.line == 3
    assert 'line 3' in str(info.value)


def test_unknown_key_is_rejected():
    with pytest.raises(ConfigError, match='Unknown configuration key'):
        _run_config(**{'grid.spacing': '0.1'})


def test_booleans_accept_common_spellings():
    assert _run_config(**{'schedule.strict': 'off'}).strict is False
    assert _run_config(**{'schedule.strict': 'YES'}).strict is True
    with pytest.raises(ConfigError):
        _run_config(**{'schedule.strict': 'maybe'})


def test_dirichlet_needs_the_disc():
    with pytest.raises(ConfigError, match='domain=disc'):
        _run_config(mode='dirichlet')
    assert _run_config(mode='dirichlet', domain='disc').mode == 'dirichlet'


@pytest.mark.parametrize('key, value', [
    ('schedule.alpha', '1.5'),
    ('schedule.K', '1.0'),
    ('n', '4'),
    ('grid.pad', '0'),
    ('verify.test_functions', '0'),
])
def test_range_checks(key, value):
    with pytest.raises(ConfigError) as info:
        _run_config(**{key: value})
    assert info.value.key == key


def test_explicit_schedule_needs_all_three_constants():
    with pytest.raises(ConfigError, match='together'):
        _run_config(**{'schedule.a': '10'})
    run = _run_config(**{'schedule.a': '10', 'schedule.b': '1.5', 'schedule.c': '0.9'})
    assert run.explicit_schedule
    sched = run.schedule(0.18)
    assert sched.log_a == pytest.approx(math.log(10.0))


def test_problem_field_spec():
    run = _run_config(**{'problem.f.kind': 'gaussian-bump', 'problem.f.width': '0.3',
                         'problem.f.center': '0.5,0.5'})
    assert run.f.kind == 'gaussian-bump'
    assert run.f.params == {'width': 0.3, 'center': '0.5,0.5'}


def test_unknown_preset_is_rejected():
    with pytest.raises(ConfigError, match='Unknown preset') as info:
        _run_config(**{'problem.f.kind': 'volcano'})
    assert info.value.key == 'problem.f.kind'


def test_field_takes_kind_or_file():
    with pytest.raises(ConfigError):
        _run_config(**{'problem.g.width': '0.3'})
    with pytest.raises(ConfigError, match='not both'):
        _run_config(**{'problem.g.kind': 'zero', 'problem.g.file': 'g.cigrid'})


def test_json_config_is_flattened(tmp_path):
    path = tmp_path / 'run.json'
    path.write_text(json.dumps({'mode': 'dirichlet', 'domain': 'disc',
                                'grid': {'resolution': 64, 'pad': 0.1},
                                'problem': {'f': {'kind': 'constant', 'value': 2.0}}}))
    run = RunConfig.from_config(Config(DEFAULT_CONFIG, str(path)))
    assert run.resolution == 64 and run.pad == 0.1
    assert run.f.params == {'value': 2.0}


def test_invalid_json_is_a_config_error(tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{"mode": ')
    with pytest.raises(ConfigError):
        Config(DEFAULT_CONFIG, str(path))


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError, match='Cannot read'):
        Config(DEFAULT_CONFIG, str(tmp_path / 'absent.cfg'))


def test_environment_selects_the_config_file(tmp_path, monkeypatch):
    path = tmp_path / 'env.cfg'
    path.write_text('seed=9\n')
    monkeypatch.setenv('CORRUGATE_CONFIG', str(path))
    assert RunConfig.from_config(Config(DEFAULT_CONFIG)).seed == 9


def test_verify_seed_follows_the_run_seed():
    assert _run_config(seed='4').verify_seed == 4
    assert _run_config(seed='4', **{'verify.seed': '11'}).verify_seed == 11


def test_resolution_check(desk):
    run = _run_config(**{'grid.resolution': '96', 'grid.pad': '0.1', 'grid.points_per_period': '4',
                         'schedule.q_max': '0'})
    grid = run.build_grid()
    run.check_resolution(grid, desk)
    coarse = _run_config(**{'grid.resolution': '32', 'grid.pad': '0.1', 'grid.points_per_period': '4',
                            'schedule.q_max': '0'})
    with pytest.raises(ConfigError, match='lambda') as info:
        coarse.check_resolution(coarse.build_grid(), desk)
    assert info.value.key == 'grid.resolution'


def test_resolution_check_beyond_float_range():
    run = _run_config()
    huge = Schedule(log_a=5000.0, b=1.05, c=3.8, alpha=0.1, sigma=0.05, K=10.0, q_max=3, n=2)
    with pytest.raises(ConfigError, match='float range'):
        run.check_resolution(run.build_grid(), huge)


def test_sample_presets_on_a_grid(square_grid):
    run = _run_config(**{'problem.f.kind': 'polynomial', 'problem.f.terms': '1:2,0;-1:0,2'})
    f, func = run.sample('f', square_grid)
    x = square_grid.coords
    inside = square_grid.interior
    assert np.allclose(f.values[inside], (x[0] ** 2 - x[1] ** 2)[inside])
    assert func is not None


def test_save_round_trip(tmp_path):
    cfg = Config(DEFAULT_CONFIG)
    cfg.set('grid.resolution', 64)
    cfg.set('problem.f.kind', 'zero')
    for name in ('run.cfg', 'run.json'):
        path = str(tmp_path / name)
        cfg.save_to_file(path)
        run = RunConfig.from_config(Config(DEFAULT_CONFIG, path))
        assert run.resolution == 64
        assert run.f.kind == 'zero'


def test_preset_parameters_are_validated():
    with pytest.raises(ConfigError):
        make_preset('gaussian-bump', {'width': -1.0})
    with pytest.raises(ConfigError):
        make_preset('polynomial', {'terms': '1:2;x'})
