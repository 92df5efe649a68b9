"""
SQLite ledger of corrugate runs, their stage reports and residual reports
"""

import sqlite3
import os
import json
import logging
import traceback
from contextlib import closing, contextmanager
from datetime import datetime
from pathlib import Path

from core.utils import json_default

logger = logging.getLogger('corrugate.db')

SCHEMA = (
    '''
    CREATE TABLE IF NOT EXISTS runs (
        id INTEGER PRIMARY KEY AUTOINCREMENT,
        timestamp TEXT NOT NULL,
        mode TEXT NOT NULL,
        n INTEGER NOT NULL,
        seed INTEGER DEFAULT 0,
        q_max INTEGER DEFAULT 0,
        status TEXT DEFAULT 'running',
        exit_code INTEGER,
        output_dir TEXT,
        config TEXT,
        provenance TEXT,
        message TEXT
    )
    ''',
    '''
    CREATE TABLE IF NOT EXISTS stage_reports (
        id INTEGER PRIMARY KEY AUTOINCREMENT,
        run_id INTEGER NOT NULL,
        q INTEGER NOT NULL,
        kind TEXT NOT NULL,
        deficit REAL,
        bound REAL,
        eps_h REAL,
        passed BOOLEAN DEFAULT 0,
        checks TEXT,
        measured TEXT,
        timings TEXT,
        FOREIGN KEY (run_id) REFERENCES runs (id)
    )
    ''',
    '''
    CREATE TABLE IF NOT EXISTS residual_reports (
        id INTEGER PRIMARY KEY AUTOINCREMENT,
        run_id INTEGER,
        timestamp TEXT NOT NULL,
        max_abs REAL,
        max_rel REAL,
        mean_rel REAL,
        entries TEXT,
        FOREIGN KEY (run_id) REFERENCES runs (id)
    )
    ''',
)


def _dumps(value):
    return json.dumps(value, sort_keys=True, default=json_default)


def _now():
    return datetime.now().strftime('%Y-%m-%d %H:%M:%S')


class RunDatabase:
    """
    Ledger of runs, their per-stage reports and their residual reports

    Writers log failures and return None/False instead of raising, so a broken
    ledger never aborts a run.
    """
    def __init__(self, db_path=None):
        """
        Open (and create if needed) the run database

        Args:
            db_path (str, optional): Path to the SQLite file; 'corrugate_runs.db' in the
                                     current directory when omitted
        """
        db_path = Path(db_path) if db_path is not None else Path.cwd() / 'corrugate_runs.db'
        os.makedirs(db_path.parent, exist_ok=True)
        self.db_path = db_path
        with self._cursor() as cursor:
            for statement in SCHEMA:
                cursor.execute(statement)

    @contextmanager
    def _cursor(self):
        """Cursor inside a transaction; commits on success, always closes"""
        with closing(sqlite3.connect(self.db_path)) as conn:
            conn.row_factory = sqlite3.Row
            with conn:
                yield conn.cursor()

    def _insert(self, what, sql, params):
        try:
            with self._cursor() as cursor:
                cursor.execute(sql, params)
                return cursor.lastrowid
        except sqlite3.Error as e:
            logger.error(f"Error saving {what}: {str(e)}")
            logger.debug(traceback.format_exc())
            return None

    def _select(self, what, sql, params, json_fields):
        try:
            with self._cursor() as cursor:
                cursor.execute(sql, params)
                rows = cursor.fetchall()
        except sqlite3.Error as e:
            logger.error(f"Error reading {what}: {str(e)}")
            return []
        return [self._row_to_dict(row, json_fields) for row in rows]

    def save_run(self, run_data):
        """
        Save a new run record

        Args:
            run_data (dict): mode, n, seed, q_max, output_dir, config

        Returns:
            int: ID of the inserted record, None on failure
        """
        return self._insert('run', '''
            INSERT INTO runs (timestamp, mode, n, seed, q_max, status, output_dir, config)
            VALUES (?, ?, ?, ?, ?, ?, ?, ?)
        ''', (
            _now(),
            run_data.get('mode', 'interior'),
            int(run_data.get('n', 2)),
            int(run_data.get('seed', 0)),
            int(run_data.get('q_max', 0)),
            run_data.get('status', 'running'),
            run_data.get('output_dir'),
            _dumps(run_data.get('config', {})),
        ))

    def update_run_status(self, run_id, status, exit_code=None, provenance=None, message=None):
        """
        Update the status of a run

        Args:
            run_id (int): ID of the run to update
            status (str): 'completed', 'failed' or 'infeasible'
            exit_code (int, optional): Process exit code
            provenance (dict, optional): Provenance block of the run
            message (str, optional): Failure message

        Returns:
            bool: True if a row was updated
        """
        columns = {'status': status}
        if exit_code is not None:
            columns['exit_code'] = int(exit_code)
        if provenance is not None:
            columns['provenance'] = _dumps(provenance)
        if message is not None:
            columns['message'] = message
        assignments = ', '.join(f"{name} = ?" for name in columns)
        try:
            with self._cursor() as cursor:
                cursor.execute(f"UPDATE runs SET {assignments} WHERE id = ?", (*columns.values(), run_id))
                return cursor.rowcount > 0
        except sqlite3.Error as e:
            logger.error(f"Error updating run {run_id}: {str(e)}")
            logger.debug(traceback.format_exc())
            return False

    def save_stage_report(self, run_id, report):
        """
        Save one DeficitReport; only numeric and list measurements are kept

        Returns:
            int: ID of the inserted record, None on failure
        """
        numeric = {k: v for k, v in report.measured.items() if isinstance(v, (int, float, list))}
        return self._insert('stage report', '''
            INSERT INTO stage_reports
            (run_id, q, kind, deficit, bound, eps_h, passed, checks, measured, timings)
            VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
        ''', (
            run_id, report.q, report.kind, report.deficit, report.bound, report.eps_h,
            report.passed, _dumps(report.checks), _dumps(numeric), _dumps(report.timings),
        ))

    def save_residual_report(self, run_id, residual):
        """
        Save a ResidualReport

        Args:
            run_id (int, optional): Owning run; None for standalone verification
            residual: ResidualReport

        Returns:
            int: ID of the inserted record, None on failure
        """
        return self._insert('residual report', '''
            INSERT INTO residual_reports (run_id, timestamp, max_abs, max_rel, mean_rel, entries)
            VALUES (?, ?, ?, ?, ?, ?)
        ''', (run_id, _now(), residual.max_abs, residual.max_rel, residual.mean_rel, _dumps(residual.entries)))

    def _row_to_dict(self, row, json_fields):
        record = dict(row)
        for name in json_fields:
            if record.get(name):
                try:
                    record[name] = json.loads(record[name])
                except (TypeError, json.JSONDecodeError):
                    logger.warning(f"Could not decode column '{name}'")
        return record

    def get_run(self, run_id):
        """Run by ID, None if absent"""
        rows = self._select(f"run {run_id}", 'SELECT * FROM runs WHERE id = ?', (run_id,),
                            ('config', 'provenance'))
        return rows[0] if rows else None

    def get_runs(self, status=None, limit=50):
        """
        Most recent runs, newest first

        Args:
            status (str, optional): Only runs with this status
            limit (int): Maximum number of runs to return

        Returns:
            list: Run dictionaries
        """
        if status:
            return self._select('runs', 'SELECT * FROM runs WHERE status = ? ORDER BY id DESC LIMIT ?',
                                (status, limit), ('config', 'provenance'))
        return self._select('runs', 'SELECT * FROM runs ORDER BY id DESC LIMIT ?', (limit,),
                            ('config', 'provenance'))

    def get_stage_reports(self, run_id):
        """Stage reports of a run in stage order"""
        return self._select(f"stage reports of run {run_id}",
                            'SELECT * FROM stage_reports WHERE run_id = ? ORDER BY q, id', (run_id,),
                            ('checks', 'measured', 'timings'))

    def get_residual_reports(self, run_id):
        return self._select(f"residual reports of run {run_id}",
                            'SELECT * FROM residual_reports WHERE run_id = ? ORDER BY id', (run_id,),
                            ('entries',))
