import os
import io
import json
import math
import logging
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np
from dotenv.parser import parse_stream

from core.errors import ConfigError
from core.field import Grid, ScalarField, make_domain
from core.presets import PRESETS, make_preset
from core.scheduler import Schedule

logger = logging.getLogger('corrugate.config')

# Flat dotted keys with their defaults; None means "derived at run time"
DEFAULT_CONFIG = {
    'n': 2,
    'mode': 'interior',
    'domain': 'square',
    'seed': 0,
    'grid.resolution': 128,
    'grid.points_per_period': 16,
    'grid.pad': 0.25,
    'schedule.alpha': 0.05,
    'schedule.sigma': None,
    'schedule.K': 10.0,
    'schedule.C_universal': 1000.0,
    'schedule.q_max': 3,
    'schedule.a': None,
    'schedule.b': None,
    'schedule.c': None,
    'schedule.C_h': 10.0,
    'schedule.hat_base': None,
    'schedule.strict': True,
    'schedule.enforce_ledger': True,
    'problem.epsilon': 1.0,
    'problem.theorem': 'positive',
    'verify.test_functions': 16,
    'verify.seed': None,
    'output.dir': 'runs',
    'output.dump_stages': False,
    'output.emit_plot_data': False,
    'output.db_path': None,
}

PROBLEM_FIELDS = ('f', 'g', 'vb')
MODES = ('interior', 'dirichlet')
THEOREMS = ('positive', 'general')


def _flatten(data, prefix=''):
    out = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, f"{name}."))
        else:
            out[name] = value
    return out


class Config:
    """
    Configuration class for corrugate runs

    Keys are flat and dotted ('grid.resolution'). Values read from key=value files
    stay strings until RunConfig types them.
    """

    def __init__(self, default_config=None, config_file=None):
        """
        Initialize the configuration with default values and load from a file if provided

        Args:
            default_config (dict, optional): Default configuration values. Defaults to None.
            config_file (str, optional): Path to a key=value or JSON configuration file. Defaults to None.
        """
        self.config = dict(default_config) if default_config else {}
        self.lines = {}
        self.source = None

        # If config_file is not provided, check environment variable
        if config_file is None:
            env_config_file = os.environ.get('CORRUGATE_CONFIG')
            if env_config_file and os.path.exists(env_config_file):
                config_file = env_config_file
                logger.info(f"Using run config from environment: {env_config_file}")

        if config_file:
            self.load_from_file(config_file)
            logger.info(f"Configuration loaded from: {config_file}")

    def load_from_file(self, config_file):
        """
        Load configuration from a key=value or JSON file

        Args:
            config_file (str): Path to the configuration file

        Raises:
            ConfigError: unreadable file or unparseable line
        """
        try:
            with open(config_file, 'r') as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"Cannot read configuration file {config_file}: {e}")

        if config_file.endswith('.json'):
            try:
                data = json.loads(text)
            except json.JSONDecodeError as e:
                raise ConfigError(f"Invalid JSON in {config_file}: {e.msg}", line=e.lineno)
            if not isinstance(data, dict):
                raise ConfigError(f"Top level of {config_file} must be an object")
            self.config.update(_flatten(data))
        else:
            self.config.update(self.parse_text(text))
        self.source = config_file

    def parse_text(self, text):
        """
        Parse key=value text with dotted keys

        Comments, quoting and blank lines follow .env conventions.

        Returns:
            dict: Parsed values (strings)
        """
        values = {}
        for binding in parse_stream(io.StringIO(text)):
            line = binding.original.line
            if binding.error:
                raise ConfigError(f"Cannot parse '{binding.original.string.strip()}'", line=line)
            if binding.key is None:
                continue
            if binding.value is None:
                raise ConfigError("Missing '=' and value", key=binding.key, line=line)
            values[binding.key] = binding.value
            self.lines[binding.key] = line
        return values

    def get(self, key, default=None):
        """
        Get a configuration value

        Args:
            key (str): Configuration key
            default: Default value to return if the key is not found

        Returns:
            The configuration value or default
        """
        return self.config.get(key, default)

    def set(self, key, value):
        """
        Set a configuration value

        Args:
            key (str): Configuration key
            value: Value to set
        """
        self.config[key] = value

    def line_of(self, key):
        return self.lines.get(key)

    def to_dict(self):
        """
        Get the entire configuration as a dictionary

        Returns:
            dict: Configuration dictionary
        """
        return self.config.copy()

    def save_to_file(self, config_file):
        """
        Save the configuration in key=value form (JSON when the name ends in .json)

        Args:
            config_file (str): Destination path

        Raises:
            ConfigError: if the file cannot be written
        """
        try:
            with open(config_file, 'w') as f:
                if config_file.endswith('.json'):
                    json.dump(self.config, f, indent=4, sort_keys=True)
                else:
                    for key in sorted(self.config):
                        value = self.config[key]
                        if value is not None:
                            f.write(f"{key}={value}\n")
        except OSError as e:
            raise ConfigError(f"Cannot write configuration file {config_file}: {e}")


# ---------------------------------------------------------------------------
# Typed run configuration
# ---------------------------------------------------------------------------

def _to_bool(value):
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ('1', 'true', 'yes', 'on'):
        return True
    if text in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _param_value(value):
    """Preset parameters: numbers when they look like numbers, strings otherwise"""
    if isinstance(value, (int, float)):
        return value
    try:
        return float(value)
    except (TypeError, ValueError):
        return value


@dataclass
class FieldSpec:
    """Preset name and parameters, or a CIGRID file, for one of f, g, v^b"""

    kind: Optional[str] = None
    params: dict = field(default_factory=dict)
    file: Optional[str] = None

    def to_dict(self):
        return asdict(self)


@dataclass
class RunConfig:
    """Validated, typed run configuration"""

    n: int = 2
    mode: str = 'interior'
    domain: str = 'square'
    seed: int = 0
    resolution: int = 128
    points_per_period: int = 16
    pad: float = 0.25
    alpha: float = 0.05
    sigma: Optional[float] = None
    K: float = 10.0
    C_universal: float = 1000.0
    q_max: int = 3
    a: Optional[float] = None
    b: Optional[float] = None
    c: Optional[float] = None
    C_h: float = 10.0
    hat_base: Optional[float] = None
    strict: bool = True
    enforce_ledger: bool = True
    f: FieldSpec = field(default_factory=lambda: FieldSpec('constant', {'value': 1.0}))
    g: FieldSpec = field(default_factory=lambda: FieldSpec('zero'))
    vb: FieldSpec = field(default_factory=lambda: FieldSpec('zero'))
    epsilon: float = 1.0
    theorem: str = 'positive'
    test_functions: int = 16
    verify_seed: int = 0
    output_dir: str = 'runs'
    dump_stages: bool = False
    emit_plot_data: bool = False
    db_path: Optional[str] = None

    _SCALARS = {
        'n': ('n', int), 'mode': ('mode', str), 'domain': ('domain', str), 'seed': ('seed', int),
        'grid.resolution': ('resolution', int), 'grid.points_per_period': ('points_per_period', int),
        'grid.pad': ('pad', float), 'schedule.alpha': ('alpha', float), 'schedule.sigma': ('sigma', float),
        'schedule.K': ('K', float), 'schedule.C_universal': ('C_universal', float),
        'schedule.q_max': ('q_max', int), 'schedule.a': ('a', float), 'schedule.b': ('b', float),
        'schedule.c': ('c', float), 'schedule.C_h': ('C_h', float), 'schedule.hat_base': ('hat_base', float),
        'schedule.strict': ('strict', _to_bool), 'schedule.enforce_ledger': ('enforce_ledger', _to_bool),
        'problem.epsilon': ('epsilon', float), 'problem.theorem': ('theorem', str),
        'verify.test_functions': ('test_functions', int), 'verify.seed': ('verify_seed', int),
        'output.dir': ('output_dir', str), 'output.dump_stages': ('dump_stages', _to_bool),
        'output.emit_plot_data': ('emit_plot_data', _to_bool), 'output.db_path': ('db_path', str),
    }

    @classmethod
    def from_config(cls, cfg):
        """
        Validate and type a Config

        Args:
            cfg (Config): Raw configuration

        Returns:
            RunConfig: Typed configuration

        Raises:
            ConfigError: unknown key, bad value or inconsistent combination
        """
        values = {}
        specs = {name: {} for name in PROBLEM_FIELDS}
        for key, raw in cfg.to_dict().items():
            line = cfg.line_of(key) if hasattr(cfg, 'line_of') else None
            if key in cls._SCALARS:
                if raw is None or raw == '':
                    continue
                attr, convert = cls._SCALARS[key]
                try:
                    values[attr] = convert(raw)
                except (TypeError, ValueError) as e:
                    raise ConfigError(f"Bad value {raw!r}: {e}", key=key, line=line)
                continue
            parts = key.split('.')
            if len(parts) == 3 and parts[0] == 'problem' and parts[1] in PROBLEM_FIELDS:
                specs[parts[1]][parts[2]] = (raw, line)
                continue
            raise ConfigError("Unknown configuration key", key=key, line=line)

        if 'verify_seed' not in values:
            values['verify_seed'] = values.get('seed', 0)
        run = cls(**values)
        for name, entries in specs.items():
            if entries:
                setattr(run, name, cls._field_spec(name, entries))
        run.validate(cfg)
        return run

    @staticmethod
    def _field_spec(name, entries):
        spec = FieldSpec()
        for param, (raw, line) in entries.items():
            if param == 'kind':
                if raw not in PRESETS:
                    raise ConfigError(f"Unknown preset '{raw}', expected one of {', '.join(PRESETS)}",
                                      key=f"problem.{name}.kind", line=line)
                spec.kind = raw
            elif param == 'file':
                spec.file = raw
            else:
                spec.params[param] = _param_value(raw)
        if spec.kind is None and spec.file is None:
            raise ConfigError("Field needs a 'kind' or a 'file'", key=f"problem.{name}")
        if spec.kind is not None and spec.file is not None:
            raise ConfigError("Field takes either a 'kind' or a 'file', not both", key=f"problem.{name}")
        return spec

    def validate(self, cfg=None):
        """Cross-key checks; raises ConfigError"""
        def fail(message, key):
            line = cfg.line_of(key) if cfg is not None and hasattr(cfg, 'line_of') else None
            raise ConfigError(message, key=key, line=line)

        if self.mode not in MODES:
            fail(f"mode must be one of {MODES}, got '{self.mode}'", 'mode')
        if self.domain not in ('square', 'disc'):
            fail(f"domain must be 'square' or 'disc', got '{self.domain}'", 'domain')
        if self.mode == 'dirichlet' and self.domain != 'disc':
            fail("mode=dirichlet requires domain=disc", 'mode')
        if self.n not in (2, 3):
            fail(f"runs support n in {{2, 3}}, got {self.n}", 'n')
        if self.theorem not in THEOREMS:
            fail(f"problem.theorem must be one of {THEOREMS}", 'problem.theorem')
        if self.resolution < 4:
            fail("grid.resolution must be at least 4", 'grid.resolution')
        if self.points_per_period < 2:
            fail("grid.points_per_period must be at least 2", 'grid.points_per_period')
        if self.pad <= 0:
            fail("grid.pad must be positive", 'grid.pad')
        if not 0.0 < self.alpha < 1.0:
            fail("schedule.alpha must lie in (0, 1)", 'schedule.alpha')
        if self.K <= 1.0:
            fail("schedule.K must exceed 1", 'schedule.K')
        if self.sigma is not None and self.sigma <= 0:
            fail("schedule.sigma must be positive", 'schedule.sigma')
        if self.q_max < 0:
            fail("schedule.q_max must be nonnegative", 'schedule.q_max')
        if self.seed < 0:
            fail("seed must be nonnegative", 'seed')
        explicit = [self.a is not None, self.b is not None, self.c is not None]
        if any(explicit) and not all(explicit):
            fail("schedule.a, schedule.b and schedule.c must be given together", 'schedule.a')
        if self.test_functions < 1:
            fail("verify.test_functions must be at least 1", 'verify.test_functions')

    @property
    def explicit_schedule(self):
        return self.a is not None

    def resolved_db_path(self):
        return self.db_path or os.path.join(self.output_dir, 'corrugate_runs.db')

    def build_grid(self):
        return Grid.build(make_domain(self.domain, self.n), self.resolution, self.pad)

    def schedule(self, sigma, sigma_star=None):
        """Explicit schedule from schedule.a/b/c"""
        return Schedule.from_a(self.a, b=self.b, c=self.c, alpha=self.alpha, sigma=sigma, K=self.K,
                               C_universal=self.C_universal, q_max=self.q_max, n=self.n,
                               sigma_star=sigma_star)

    def check_resolution(self, grid, sched):
        """
        The grid must carry points_per_period samples per period of λ_{q_max+1}

        Raises:
            ConfigError: under-resolved grid
        """
        log_top = sched.log_lambda(self.q_max + 1)
        limit = -math.log(grid.h * self.points_per_period)
        if log_top > limit + 1e-12:
            needed = 'beyond float range' if log_top > 700 else f"{math.ceil(math.exp(log_top) * self.points_per_period)}"
            raise ConfigError(f"grid does not resolve lambda_(q_max+1): needs about {needed} points per unit "
                              f"length, grid has {1.0 / grid.h:.6g}", key='grid.resolution')

    def sample(self, name, grid):
        """
        Sample f, g or v^b on the grid

        Returns:
            tuple: (ScalarField, callable or None); the callable is the analytic preset
        """
        spec = getattr(self, name)
        if spec.file:
            from db.cigrid import read_field
            return read_field(spec.file).to_field(grid), None
        func = make_preset(spec.kind, spec.params)
        values = np.broadcast_to(func(grid.coords), grid.shape)
        return ScalarField(grid, grid.extend(values)), func

    def to_dict(self):
        out = asdict(self)
        out['explicit_schedule'] = self.explicit_schedule
        return out
