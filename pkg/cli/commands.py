"""
Subcommand implementations; each returns the process exit code
"""

import json
import logging
import traceback

from config import DEFAULT_CONFIG, Config, RunConfig
from core.errors import (
    EXIT_CONFIG, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_OK, EXIT_STAGE, ConfigError, CorrugateError, exit_code_for,
)
from core.stages import build_background
from core.utils import format_float, json_default
from services.feasibility_service import FeasibilityService
from services.field_service import FieldService
from services.run_service import RunService, build_problem
from services.verify_service import VerifyService

logger = logging.getLogger('corrugate.cli')


def load_run_config(config_path=None, overrides=()):
    """
    Defaults, then the file, then ``key=value`` overrides

    Raises:
        ConfigError: unreadable file, malformed override or invalid value
    """
    cfg = Config(DEFAULT_CONFIG, config_path)
    for item in overrides or ():
        if '=' not in item:
            raise ConfigError(f"Override '{item}' is not key=value")
        key, value = item.split('=', 1)
        cfg.set(key.strip(), value.strip())
    return RunConfig.from_config(cfg)


def _guarded(action):
    try:
        return action()
    except (CorrugateError, OSError) as e:
        code = exit_code_for(e)
        logger.error(f"{type(e).__name__}: {str(e)}")
        logger.debug(traceback.format_exc())
        return code


def cmd_feasible(config_path=None, overrides=(), as_json=False):
    """
    Resolve and print the parameter ledger

    Returns:
        int: 0 when feasible, 2 when not
    """
    def action():
        run_cfg = load_run_config(config_path, overrides)
        psi = None
        if run_cfg.mode == 'dirichlet':
            psi = build_background(build_problem(run_cfg), None).psi
        result = FeasibilityService().resolve(run_cfg, psi)
        if as_json:
            print(json.dumps(result.to_dict(), indent=2, sort_keys=True, default=json_default))
        else:
            if result.ledger is not None:
                print(result.ledger.to_text())
            if result.infeasible is not None:
                print(f"infeasible: {result.infeasible.reason}")
            print(json.dumps({'feasible': result.feasible, 'sigma': result.sigma,
                              'schedule': result.schedule.to_dict() if result.schedule else None},
                             sort_keys=True, default=json_default))
        return EXIT_OK if result.feasible else EXIT_INFEASIBLE
    return _guarded(action)


def cmd_run(config_path=None, overrides=(), dump_stages=False, emit_plot_data=False):
    """
    Execute a configured run

    Returns:
        int: 0 completed, 2 infeasible, 3 stage assertion failure, 4 configuration or I/O, 1 otherwise
    """
    def action():
        extra = list(overrides or ())
        if dump_stages:
            extra.append('output.dump_stages=true')
        if emit_plot_data:
            extra.append('output.emit_plot_data=true')
        run_cfg = load_run_config(config_path, extra)
        outcome = RunService(run_cfg).execute()
        if outcome.status == 'infeasible':
            reason = outcome.feasibility.infeasible.reason if outcome.feasibility.infeasible else 'ledger failed'
            print(f"infeasible: {reason}")
            return EXIT_INFEASIBLE
        solution = outcome.solution
        last = solution.reports[-1]
        print(f"run {outcome.run_id}: q={solution.state.q} deficit={format_float(last.deficit)} "
              f"bound={format_float(last.bound)} residual_max_rel={format_float(solution.residual.max_rel)} "
              f"-> {outcome.output_dir}")
        return EXIT_OK
    return _guarded(action)


def cmd_verify(v_path, f_path, config_path=None, overrides=(), output=None):
    """
    Weak residual of a v file against an f file

    Returns:
        int: 0 on success, 4 on unreadable or mismatched files
    """
    def action():
        run_cfg = load_run_config(config_path, overrides)
        report = VerifyService(run_cfg).verify_files(v_path, f_path, output)
        print(report.to_frame().to_string(index=False))
        print(json.dumps({'max_abs': report.max_abs, 'max_rel': report.max_rel,
                          'mean_rel': report.mean_rel}, sort_keys=True))
        return EXIT_OK
    return _guarded(action)


def cmd_dump(path, csv_path=None):
    """Header, statistics and per-component table of a field file"""
    def action():
        result = FieldService().dump(path, csv_path)
        print(json.dumps({'header': result['header'], 'stats': result['stats']}, indent=2, sort_keys=True))
        print(result['components'].to_string(index=False))
        return EXIT_OK
    return _guarded(action)


def cmd_info(path):
    """Header echo of a field file"""
    def action():
        print(json.dumps(FieldService().info(path), indent=2, sort_keys=True))
        return EXIT_OK
    return _guarded(action)
