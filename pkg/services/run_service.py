"""
Run Service module
Builds the problem from a run configuration, executes the construction and
writes every artifact: fields, stage records, tables, provenance and DB rows
"""

import json
import logging
import os
import traceback
from dataclasses import dataclass, field
from typing import Optional

import pandas as pd

from core.errors import (
    EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK, ConfigError, CorrugateError, exit_code_for,
)
from core.logging_config import log_stage_record
from core.stages import Problem, Solution, StageOptions, build_background, run
from core.utils import json_default
from db.cigrid import write_field
from db.database import RunDatabase
from services.feasibility_service import FeasibilityResult, FeasibilityService

logger = logging.getLogger('corrugate.services.run')


@dataclass
class RunOutcome:
    """What a run produced"""

    status: str
    output_dir: str
    run_id: Optional[int] = None
    solution: Optional[Solution] = None
    feasibility: Optional[FeasibilityResult] = None
    files: list = field(default_factory=list)


def _write_json(path, data):
    with open(path, 'w') as f:
        json.dump(data, f, indent=2, sort_keys=True, default=json_default)


def build_problem(run_cfg):
    """
    Grid and Problem of a configuration

    Returns:
        Problem: The problem to solve
    """
    grid = run_cfg.build_grid()
    logger.info(f"Grid: {grid.describe()}")
    f, _ = run_cfg.sample('f', grid)
    if run_cfg.mode == 'interior':
        vb, _ = run_cfg.sample('vb', grid)
        return Problem(grid=grid, f=f, mode='interior', vb=vb)
    g_field, g_func = run_cfg.sample('g', grid)
    return Problem(grid=grid, f=f, mode='dirichlet', g=g_func or g_field, theorem=run_cfg.theorem)


class RunService:
    """
    Service for executing configured runs
    """
    def __init__(self, run_cfg):
        self.cfg = run_cfg
        self.output_dir = run_cfg.output_dir
        self.db = RunDatabase(run_cfg.resolved_db_path())
        self.feasibility_service = FeasibilityService()
        self.files = []
        self.run_id = None

    def _path(self, name):
        return os.path.join(self.output_dir, name)

    def _write_field(self, name, f):
        path = self._path(name)
        write_field(path, f)
        self.files.append(path)

    def build_problem(self):
        return build_problem(self.cfg)

    def stage_options(self):
        cfg = self.cfg
        return StageOptions(points_per_period=cfg.points_per_period, C_h=cfg.C_h, strict=cfg.strict,
                            seed=cfg.seed, hat_base=cfg.hat_base, verify_count=cfg.test_functions,
                            verify_seed=cfg.verify_seed, epsilon=cfg.epsilon)

    def _transect(self, state):
        """Values along the first axis through the middle of the other axes"""
        grid = state.grid
        middle = tuple(s // 2 for s in grid.shape[1:])
        index = (slice(None),) + middle
        v, _ = state.solution_fields()
        return pd.DataFrame({
            'x': grid.axes[0],
            'v': v.values[index],
            'vb': state.bg.vb.values[index],
            'V': state.V.values[index],
            'interior': grid.interior[index],
        })

    def _on_stage(self, state, report):
        record = report.to_record()
        log_stage_record(logger, record, self._path('stages.jsonl'))
        if self.run_id is not None:
            self.db.save_stage_report(self.run_id, report)
        if self.cfg.dump_stages:
            self._write_field(f"stage_q{state.q}_V.cigrid", state.V)
            self._write_field(f"stage_q{state.q}_W.cigrid", state.W)
        if self.cfg.emit_plot_data:
            path = self._path(f"transect_q{state.q}.csv")
            self._transect(state).to_csv(path, index=False)
            self.files.append(path)

    def _dump_partial(self, error):
        partial = getattr(error, 'partial', None) or {}
        state = partial.get('state')
        if state is not None:
            self._write_field(f"partial_q{state.q}_V.cigrid", state.V)
            self._write_field(f"partial_q{state.q}_W.cigrid", state.W)
        reports = partial.get('reports') or []
        path = self._path('partial_reports.json')
        _write_json(path, [r.to_dict() for r in reports])
        self.files.append(path)
        logger.info(f"Partial results written to {self.output_dir}")

    def execute(self):
        """
        Run the configured construction

        Returns:
            RunOutcome: status 'completed' or 'infeasible'

        Raises:
            ConfigError: under-resolved grid or unreadable input files
            CorrugateError: stage failure, after partial results are dumped
        """
        cfg = self.cfg
        os.makedirs(self.output_dir, exist_ok=True)
        jsonl = self._path('stages.jsonl')
        if os.path.exists(jsonl):
            os.remove(jsonl)

        problem = self.build_problem()
        bg = build_background(problem, None) if problem.mode == 'dirichlet' else None
        feas = self.feasibility_service.resolve(cfg, bg.psi if bg is not None else None)
        self.run_id = self.db.save_run({
            'mode': cfg.mode, 'n': cfg.n, 'seed': cfg.seed, 'q_max': cfg.q_max,
            'output_dir': self.output_dir, 'config': cfg.to_dict(),
        })
        if not feas.usable:
            self.db.update_run_status(self.run_id, 'infeasible', exit_code=EXIT_INFEASIBLE,
                                      provenance=feas.to_dict())
            _write_json(self._path('ledger.json'), feas.to_dict())
            return RunOutcome(status='infeasible', output_dir=self.output_dir, run_id=self.run_id,
                              feasibility=feas)

        sched = feas.schedule
        try:
            cfg.check_resolution(problem.grid, sched)
        except ConfigError as e:
            self.db.update_run_status(self.run_id, 'failed', exit_code=EXIT_CONFIG, message=str(e))
            raise
        if bg is None:
            bg = build_background(problem, sched)

        try:
            solution = run(problem, sched, feas.frame, self.stage_options(), cfg.q_max,
                           on_stage=self._on_stage, bg=bg)
        except CorrugateError as e:
            logger.error(f"Run failed: {str(e)}")
            logger.debug(traceback.format_exc())
            try:
                self._dump_partial(e)
            except CorrugateError as dump_error:
                logger.error(f"Could not dump partial results: {dump_error}")
            self.db.update_run_status(self.run_id, 'failed', exit_code=exit_code_for(e), message=str(e))
            raise

        self._write_outputs(problem, bg, solution, feas)
        self.db.save_residual_report(self.run_id, solution.residual)
        self.db.update_run_status(self.run_id, 'completed', exit_code=EXIT_OK, provenance=solution.provenance)
        return RunOutcome(status='completed', output_dir=self.output_dir, run_id=self.run_id,
                          solution=solution, feasibility=feas, files=list(self.files))

    def _write_outputs(self, problem, bg, solution, feas):
        self._write_field('v.cigrid', solution.v)
        self._write_field('w.cigrid', solution.w)
        self._write_field('vb.cigrid', bg.vb)
        self._write_field('f.cigrid', bg.f)
        if bg.psi is not None:
            self._write_field('psi.cigrid', bg.psi)

        norms = self._path('norms.csv')
        solution.norm_table.to_csv(norms, index=False)
        self.files.append(norms)

        residual = self._path('residual.json')
        _write_json(residual, {**solution.residual.to_dict(), 'history': solution.residual_history})
        self.files.append(residual)

        provenance = dict(solution.provenance)
        provenance['config'] = self.cfg.to_dict()
        provenance['ledger'] = feas.ledger.to_dict() if feas.ledger else None
        provenance['run_id'] = self.run_id
        path = self._path('provenance.json')
        _write_json(path, provenance)
        self.files.append(path)

        if self.cfg.emit_plot_data:
            table = solution.residual.to_frame()
            path = self._path('residual.csv')
            table.to_csv(path, index=False)
            self.files.append(path)
        logger.info(f"Run outputs written to {self.output_dir}")
