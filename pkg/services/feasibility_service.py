"""
Feasibility Service module
Resolves the frame, σ and schedule of a run configuration and checks the ledger
"""

import logging
from dataclasses import dataclass
from typing import Optional

from core.decomp import Frame, build_frame, frame_to_text
from core.scheduler import Infeasible, LedgerReport, Schedule, check_ledger, find_feasible, series_ratio_test
from core.field import ck_norm

logger = logging.getLogger('corrugate.services.feasibility')


@dataclass
class FeasibilityResult:
    """Outcome of a feasibility check"""

    frame: Frame
    sigma: float
    schedule: Optional[Schedule]
    ledger: Optional[LedgerReport]
    infeasible: Optional[Infeasible] = None
    enforced: bool = True

    @property
    def feasible(self):
        return self.schedule is not None and self.ledger is not None and self.ledger.passed

    @property
    def usable(self):
        """A schedule exists and either passes or the ledger is not enforced"""
        return self.schedule is not None and (self.feasible or not self.enforced)

    def to_dict(self):
        out = {
            'feasible': self.feasible,
            'sigma': self.sigma,
            'frame': self.frame.to_dict(),
            'schedule': self.schedule.to_dict() if self.schedule else None,
            'ledger': self.ledger.to_dict() if self.ledger else None,
            'series': series_ratio_test(self.schedule).to_dict() if self.schedule else None,
        }
        if self.infeasible is not None:
            out['infeasible'] = self.infeasible.to_dict()
        return out


class FeasibilityService:
    """
    Service for schedule resolution
    """
    def resolve(self, run_cfg, psi=None):
        """
        Frame, σ and schedule for a configuration

        Explicit schedule.a/b/c are checked against the ledger; otherwise the
        feasibility search picks them.

        Args:
            run_cfg (RunConfig): Typed configuration
            psi (ScalarField, optional): Dirichlet-mode potential, adds the cut-off entries

        Returns:
            FeasibilityResult: The resolved parameters
        """
        frame = build_frame(run_cfg.n, run_cfg.seed)
        logger.info(frame_to_text(frame))
        sigma = run_cfg.sigma if run_cfg.sigma is not None else frame.sigma_star / 3.0
        psi_norm = ck_norm(psi, 1, psi.grid.interior) if psi is not None else None

        if run_cfg.explicit_schedule:
            sched = run_cfg.schedule(sigma, frame.sigma_star)
            ledger = check_ledger(sched, psi_norm)
            result = FeasibilityResult(frame=frame, sigma=sigma, schedule=sched, ledger=ledger,
                                       enforced=run_cfg.enforce_ledger)
            if not ledger.passed:
                message = f"Explicit schedule fails ledger entries: {', '.join(ledger.failures)}"
                if run_cfg.enforce_ledger:
                    logger.error(message)
                else:
                    logger.warning(message + " (not enforced)")
            return result

        found = find_feasible(run_cfg.n, run_cfg.alpha, sigma, run_cfg.K, run_cfg.C_universal, psi_norm,
                              run_cfg.q_max, frame.sigma_star)
        if isinstance(found, Infeasible):
            logger.warning(f"Infeasible: {found.reason}")
            return FeasibilityResult(frame=frame, sigma=sigma, schedule=None, ledger=None, infeasible=found,
                                     enforced=run_cfg.enforce_ledger)
        return FeasibilityResult(frame=frame, sigma=sigma, schedule=found, ledger=check_ledger(found, psi_norm),
                                 enforced=run_cfg.enforce_ledger)
