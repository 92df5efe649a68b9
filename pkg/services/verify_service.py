"""
Verify Service module
Evaluates the very-weak residual of field files against bump test functions
"""

import json
import logging

from core.verify import random_test_functions, weak_residual
from core.utils import json_default
from db.cigrid import read_field
from db.database import RunDatabase

logger = logging.getLogger('corrugate.services.verify')


class VerifyService:
    """
    Service for checking candidate solutions
    """
    def __init__(self, run_cfg):
        self.cfg = run_cfg
        self.db = RunDatabase(run_cfg.resolved_db_path())

    def verify_files(self, v_path, f_path, output=None):
        """
        Residual of the v file against the f file

        Both files must live on the grid the configuration describes.

        Args:
            v_path (str): CIGRID scalar file with the candidate v
            f_path (str): CIGRID scalar file with the right-hand side
            output (str, optional): Destination of the JSON report

        Returns:
            ResidualReport: Per-test-function errors

        Raises:
            FieldFormatError: unreadable or mismatched files
        """
        grid = self.cfg.build_grid()
        v = read_field(v_path).to_field(grid)
        f = read_field(f_path).to_field(grid)
        phis = random_test_functions(grid.domain, self.cfg.test_functions, self.cfg.verify_seed)
        report = weak_residual(v, f, phis)
        logger.info(f"Residual of {v_path}: max rel {report.max_rel:.4e}, mean rel {report.mean_rel:.4e}")
        self.db.save_residual_report(None, report)
        if output:
            with open(output, 'w') as out:
                json.dump(report.to_dict(), out, indent=2, sort_keys=True, default=json_default)
        return report
