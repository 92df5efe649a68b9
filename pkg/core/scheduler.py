"""
Double-exponential parameter schedules and the inequality ledger

δ_q = a^{−b^q} and λ_q = a^{c b^q}. Everything is evaluated from log a so that the
enormous bases that make a schedule admissible stay representable; only the
per-stage values handed to the construction are exponentiated.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np
import pandas as pd

from .errors import ScheduleError
from .field import n_star

logger = logging.getLogger('corrugate.scheduler')

_LOG_MAX = math.log(np.finfo(float).max)
_LOG_MIN = math.log(np.finfo(float).tiny)


def holder_threshold(n):
    """Exclusive upper bound 1/(1 + 2N*) = 1/(1 + n + n²) of reachable exponents"""
    return 1.0 / (1.0 + 2.0 * n_star(n))


@dataclass(frozen=True)
class Schedule:
    """
    Parameters of a construction

    Args:
        log_a (float): ln a, a > 1
        b (float): Growth of the exponents, in (1, 2)
        c (float): Frequency exponent
        alpha (float): Target Hölder exponent
        sigma (float): Deficit constant σ
        K (float): Norm constant K > 1
        C_universal (float): Stand-in for every universal constant
        q_max (int): Stage count
        n (int): Dimension
        sigma_star (float, optional): Frame radius the σ range is checked against
    """

    log_a: float
    b: float
    c: float
    alpha: float
    sigma: float
    K: float
    C_universal: float = 1e3
    q_max: int = 3
    n: int = 2
    sigma_star: Optional[float] = None

    @classmethod
    def from_a(cls, a, **kwargs):
        if not a > 1:
            raise ScheduleError(f"Schedule base must exceed 1, got {a}")
        return cls(log_a=math.log(a), **kwargs)

    @property
    def N_star(self):
        return n_star(self.n)

    @property
    def a(self):
        return math.exp(self.log_a) if self.log_a < _LOG_MAX else math.inf

    def log_delta(self, q):
        return -(self.b ** q) * self.log_a

    def log_lambda(self, q):
        return self.c * self.b ** q * self.log_a

    def log_mu0(self, q):
        return (math.log(self.K) - 0.5 * self.log_delta(q + 1) + 0.5 * self.log_delta(q)
                + self.log_lambda(q))

    def log_l(self, q):
        return math.log(self.sigma) - math.log(self.C_universal) - self.log_mu0(q)

    def log_mu(self, q, i):
        frac = i / self.N_star
        return (1.0 - frac) * self.log_mu0(q) + frac * self.log_lambda(q + 1)

    def to_dict(self):
        out = asdict(self)
        out['a'] = self.a
        out['N_star'] = self.N_star
        return out


@dataclass(frozen=True)
class StageSequence:
    """Exponentiated parameters of stage q"""

    q: int
    delta_q: float
    delta_q1: float
    delta_q2: float
    lambda_q: float
    lambda_q1: float
    mu0: float
    l: float
    mus: tuple

    def to_dict(self):
        out = asdict(self)
        out['mus'] = list(self.mus)
        return out


def _exp(value, name, q):
    if value > _LOG_MAX or value < _LOG_MIN:
        raise ScheduleError(f"schedule exceeds float range: ln {name} = {value:.6g} at q={q}")
    return math.exp(value)


def sequences(s, q):
    """
    δ_q, δ_{q+1}, δ_{q+2}, λ_q, λ_{q+1}, μ₀, l and μ_1..μ_{N*} for stage q

    μ₀ = Kδ_{q+1}^{−1/2}δ_q^{1/2}λ_q, l = σ/(Cμ₀) and μ_i = μ₀^{1−i/N*}λ_{q+1}^{i/N*}.

    Args:
        s (Schedule): Schedule
        q (int): Stage index

    Returns:
        StageSequence: The values; ``mus`` starts with μ₀

    Raises:
        ScheduleError: schedule exceeds float range, or μ₀ > λ_{q+1}
    """
    log_mus = [s.log_mu(q, i) for i in range(s.N_star + 1)]
    if log_mus[0] > s.log_lambda(q + 1):
        raise ScheduleError(f"frequency ladder inverted at q={q}: mu0={math.exp(min(log_mus[0], _LOG_MAX)):.4g} "
                            f"exceeds lambda_(q+1)")
    mus = tuple(_exp(lm, f'mu_{i}', q) for i, lm in enumerate(log_mus))
    return StageSequence(
        q=q,
        delta_q=_exp(s.log_delta(q), 'delta_q', q),
        delta_q1=_exp(s.log_delta(q + 1), 'delta_q+1', q),
        delta_q2=_exp(s.log_delta(q + 2), 'delta_q+2', q),
        lambda_q=_exp(s.log_lambda(q), 'lambda_q', q),
        lambda_q1=_exp(s.log_lambda(q + 1), 'lambda_q+1', q),
        mu0=mus[0],
        l=_exp(s.log_l(q), 'l', q),
        mus=mus,
    )


@dataclass
class LedgerEntry:
    """One inequality checked over a q range; margins are ≥ 0 when it holds"""

    name: str
    q_range: tuple
    worst_margin: float
    passed: bool
    worst_q: Optional[int] = None
    note: str = ''


@dataclass
class LedgerReport:
    schedule: Schedule
    entries: list = field(default_factory=list)

    @property
    def passed(self):
        return all(e.passed for e in self.entries)

    @property
    def failures(self):
        return [e.name for e in self.entries if not e.passed]

    def entry(self, name):
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_frame(self):
        return pd.DataFrame([asdict(e) for e in self.entries])

    def to_text(self):
        frame = self.to_frame()
        if frame.empty:
            return '(empty ledger)'
        frame['q_range'] = frame['q_range'].map(lambda r: f"{r[0]}..{r[1]}")
        return frame.to_string(index=False)

    def to_dict(self):
        return {
            'schedule': self.schedule.to_dict(),
            'passed': self.passed,
            'entries': [asdict(e) for e in self.entries],
        }


def _worst(name, q_values, margin_fn, note=''):
    margins = [(margin_fn(q), q) for q in q_values]
    worst, q_at = min(margins)
    return LedgerEntry(name=name, q_range=(min(q_values), max(q_values)), worst_margin=float(worst),
                       passed=bool(worst >= 0.0), worst_q=q_at, note=note)


def check_ledger(s, psi_norm=None):
    """
    Evaluate every inequality the construction needs for q = 0..q_max

    Margins of exponent inequalities are in exponent units, margins of size
    inequalities are natural logarithms of the ratio (rhs / lhs).

    Args:
        s (Schedule): Schedule to certify
        psi_norm (float, optional): ‖ψ‖₁ of a dirichlet-mode background; adds the cut-off entries

    Returns:
        LedgerReport: One entry per inequality
    """
    qs = list(range(0, s.q_max + 1))
    L = s.log_a
    N = s.N_star
    C, K, sigma = s.C_universal, s.K, s.sigma
    report = LedgerReport(schedule=s)
    add = report.entries.append

    add(LedgerEntry('alpha_threshold', (0, s.q_max), holder_threshold(s.n) - s.alpha,
                    s.alpha < holder_threshold(s.n), note='alpha < 1/(1+2N*)'))
    if s.sigma_star is not None:
        limit = s.sigma_star / 3.0
        note = 'sigma in (0, sigma*/3]'
    else:
        limit = 1.0 / 6.0
        note = 'sigma in (0, 1/6], frame radius unknown'
    sigma_margin = min(limit - sigma, sigma)
    add(LedgerEntry('sigma_range', (0, s.q_max), sigma_margin,
                    bool(0.0 < sigma <= limit * (1.0 + 1e-12)), note=note))
    add(LedgerEntry('parameter_range', (0, s.q_max), min(s.b - 1.0, 2.0 - s.b, s.c, K - 1.0, L),
                    bool(1.0 < s.b < 2.0 and s.c > 0.0 and K > 1.0 and L > 0.0),
                    note='a > 1, b in (1, 2), c > 0, K > 1'))
    if not (L > 0.0 and s.b > 1.0 and sigma > 0.0):
        return report

    def c_lower(q):
        log_term = math.log(C * K / sigma ** N) / L
        return s.c - (N * s.b + 0.5 + log_term / ((s.b - 1.0) * s.b ** q))

    add(_worst('c_lower', qs, c_lower, note='c >= N*b + 1/2 + log_a(CK/sigma^N*)/((b-1)b^q)'))
    add(LedgerEntry('holder_convergence', (0, s.q_max), 0.5 - s.c * s.alpha, s.c * s.alpha < 0.5,
                    note='c*alpha < 1/2'))
    add(LedgerEntry('delta_one', (0, 0), math.log(sigma) - s.log_delta(1),
                    s.log_delta(1) <= math.log(sigma), note='delta_1 <= sigma'))
    add(_worst('delta_ratio', qs,
               lambda q: math.log(sigma) + s.log_delta(q + 1) - s.log_delta(q + 2),
               note='delta_(q+2) <= sigma delta_(q+1)'))
    add(LedgerEntry('init_frequency', (0, 0),
                    0.5 * s.log_delta(0) + s.log_lambda(0) + N * s.log_delta(1),
                    0.5 * s.log_delta(0) + s.log_lambda(0) + N * s.log_delta(1) >= 0.0,
                    note='delta_1^(-N*) <= delta_0^(1/2) lambda_0'))
    add(_worst('mollification_raw', qs,
               lambda q: math.log(sigma) + s.log_delta(q + 2) - math.log(C) - s.log_l(q),
               note='l <= sigma delta_(q+2) / C'))
    add(_worst('frequency_ratio_raw', qs,
               lambda q: N * (math.log(sigma) + s.log_delta(q + 2) - math.log(C) - s.log_delta(q + 1))
               - (s.log_mu0(q) - s.log_lambda(q + 1)),
               note='mu0/mu_N* <= (sigma delta_(q+2) / (C delta_(q+1)))^N*'))
    add(_worst('ladder_order', qs, lambda q: s.log_lambda(q + 1) - s.log_mu0(q),
               note='mu0 <= lambda_(q+1)'))

    if psi_norm is not None:
        add(_worst('cutoff_mollification', qs,
                   lambda q: s.log_delta(q + 2) - math.log(4.0 * psi_norm + 1.0) - s.log_l(q),
                   note='l <= delta_(q+2) / (4|psi|_1 + 1)'))
        add(_worst('boundary_raw', qs,
                   lambda q: (math.log(sigma) + 0.5 * s.log_delta(q + 1) + s.log_delta(q + 2)
                              - math.log(C) - 0.5 * math.log(K) - s.log_l(q)),
                   note='l <= sigma delta_(q+1)^(1/2) delta_(q+2) / (C sqrt K)'))
        add(_worst('boundary_exponent', qs,
                   lambda q: (-s.b ** 2 + 0.5 * math.log(K) / (L * s.b ** q)) - (0.5 - s.c),
                   note='1/2 - c <= -b^2 + log_a(sqrt K)/b^q'))
    return report


@dataclass(frozen=True)
class Infeasible:
    """No schedule exists (or none was found) for the requested exponent"""

    alpha: float
    n: int
    violated: tuple
    reason: str

    passed = False

    def to_dict(self):
        return {'feasible': False, 'alpha': self.alpha, 'n': self.n,
                'violated': list(self.violated), 'reason': self.reason}


def _b_candidates(n, alpha):
    """b values approaching 1 from the largest admissible one"""
    N = n_star(n)
    b_max = min((0.5 / alpha - 0.5) / N, 1.95)
    if b_max <= 1.0:
        return []
    return [1.0 + (b_max - 1.0) * frac for frac in (0.5, 0.25, 0.125, 0.0625)]


def find_feasible(n, alpha, sigma, K, C_universal=1e3, psi_norm=None, q_max=3, sigma_star=None,
                  max_doublings=200000):
    """
    Search for a schedule passing the whole ledger

    For each b approaching 1 the exponent c sits halfway between N*b + ½ and
    1/(2α); a is then doubled from 2 until every entry passes.

    Args:
        n (int): Dimension
        alpha (float): Target Hölder exponent in (0, 1)
        sigma (float): Deficit constant
        K (float): Norm constant
        C_universal (float): Universal constant stand-in
        psi_norm (float, optional): ‖ψ‖₁ for dirichlet-mode entries
        q_max (int): Stage count
        sigma_star (float, optional): Frame radius
        max_doublings (int): Cap on the doubling loop per b

    Returns:
        Schedule or Infeasible
    """
    if not 0.0 < alpha < 1.0:
        return Infeasible(alpha, n, ('alpha_range',), f"alpha must lie in (0, 1), got {alpha}")
    if alpha >= holder_threshold(n):
        return Infeasible(alpha, n, ('holder_convergence', 'c_lower'),
                          f"alpha={alpha:.6g} >= 1/(1+n+n^2)={holder_threshold(n):.6g}: "
                          f"c*alpha < 1/2 and c >= N*b + 1/2 are incompatible")

    N = n_star(n)
    c_max = 0.5 / alpha
    last_failures = ()
    for b in _b_candidates(n, alpha):
        c = 0.5 * ((N * b + 0.5) + c_max)
        base = Schedule(log_a=math.log(2.0), b=b, c=c, alpha=alpha, sigma=sigma, K=K,
                        C_universal=C_universal, q_max=q_max, n=n, sigma_star=sigma_star)
        report = check_ledger(base, psi_norm)
        static = [name for name in report.failures
                  if name in ('sigma_range', 'parameter_range', 'alpha_threshold', 'holder_convergence')]
        if static:
            return Infeasible(alpha, n, tuple(static), f"ledger entries independent of a fail: {static}")
        log_a = base.log_a
        for _ in range(max_doublings):
            candidate = replace(base, log_a=log_a)
            report = check_ledger(candidate, psi_norm)
            if report.passed:
                logger.info(f"Feasible schedule n={n} alpha={alpha:.6g}: ln a={log_a:.6g}, b={b:.6g}, c={c:.6g}")
                return candidate
            last_failures = tuple(report.failures)
            log_a += math.log(2.0)
    return Infeasible(alpha, n, last_failures or ('c_lower',),
                      "no passing schedule within the search limits")


@dataclass
class SeriesReport:
    """Ratio test of the C⁰ and C^{1,α} convergence series"""

    c0_ratios: list
    holder_ratios: list

    @property
    def converges(self):
        return bool(all(r < 1.0 for r in self.c0_ratios) and all(r < 1.0 for r in self.holder_ratios))

    def to_dict(self):
        return {'c0_ratios': self.c0_ratios, 'holder_ratios': self.holder_ratios,
                'converges': self.converges}


def series_ratio_test(s, terms=8):
    """
    Successive ratios of δ_{q+1}^{1/2} and δ_{q+1}^{1/2}λ_{q+1}^α, computed from logarithms

    Args:
        s (Schedule): Schedule
        terms (int): Number of series terms

    Returns:
        SeriesReport: Ratios; the series converge when every ratio is below 1
    """
    log_c0 = [0.5 * s.log_delta(q + 1) for q in range(terms)]
    log_h = [0.5 * s.log_delta(q + 1) + s.alpha * s.log_lambda(q + 1) for q in range(terms)]
    c0 = [math.exp(min(b - a, _LOG_MAX)) for a, b in zip(log_c0, log_c0[1:])]
    hold = [math.exp(min(b - a, _LOG_MAX)) for a, b in zip(log_h, log_h[1:])]
    return SeriesReport(c0_ratios=c0, holder_ratios=hold)
