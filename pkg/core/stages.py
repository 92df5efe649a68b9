"""
Stage inductions and the multi-stage driver

A stage takes (V_q, W_q) with a small deficit D_q and produces (V_{q+1}, W_{q+1})
whose deficit is smaller by the schedule's factor: mollify, decompose the
mollified deficit into N* rank-one pieces, then run one corrugation step per
piece at increasing frequencies. The dirichlet mode wraps the same stage in
level-set cut-offs of ψ so that nothing near the boundary is ever written.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import pandas as pd
import scipy

from .corrugation import CorrugationParams, check_resolution, step
from .decomp import Frame, decompose_field, frame_to_text
from .elliptic import Background, build_background_boundary, build_background_interior
from .errors import CorrugateError, CutoffError, StageAssertionError
from .field import (
    Grid, ScalarField, SymMatrixField, VectorField, ck_norm, gradient, holder_norm, mollify,
    smooth_indicator, sup_norm,
)
from .scheduler import Schedule, sequences
from .utils import make_rng
from .verify import deficit, quadratic_form, random_test_functions, weak_residual

logger = logging.getLogger('corrugate.stages')


@dataclass(frozen=True)
class StageOptions:
    """
    Knobs of a construction that are not schedule parameters

    Args:
        points_per_period (int): Samples required per oscillation
        C_h (float): Discretization allowance constant, ε_h = C_h h² λ_{q+1}²
        strict (bool): Raise on failed bounds instead of recording them
        seed (int): Frame rotation and step phases; 0 is the canonical construction
        hat_base (float, optional): Base of the initialization frequencies μ̂_i = base^i
        lipschitz_safety (float): Factor on sup|∇ψ| when sizing cut-off mollification
        verify_count (int): Test functions of the weak residual
        verify_seed (int): Seed of the test-function placement
        epsilon (float): Allowed ‖v − v^b‖₀
    """

    points_per_period: int = 16
    C_h: float = 10.0
    strict: bool = True
    seed: int = 0
    hat_base: Optional[float] = None
    lipschitz_safety: float = 1.1
    verify_count: int = 16
    verify_seed: int = 0
    epsilon: float = 1.0

    def phases(self, key, count):
        """Per-step phases; all zero for seed 0"""
        if self.seed == 0:
            return np.zeros(count)
        return make_rng([self.seed, key]).uniform(0.0, 1.0, size=count)


@dataclass
class DeficitReport:
    """Measured bounds of one stage (or of the initialization when kind == 'init')"""

    q: int
    mode: str
    kind: str
    deficit: float
    bound: float
    eps_h: float
    checks: dict = field(default_factory=dict)
    measured: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c['passed'] for c in self.checks.values())

    @property
    def failures(self):
        return [name for name, c in self.checks.items() if not c['passed']]

    def add_check(self, name, value, bound, allowance=0.0):
        """
        Record value <= bound + allowance

        A positive allowance that is not below the bound marks the check vacuous,
        and a vacuous check fails whatever the value.
        """
        value, bound, allowance = float(value), float(bound), float(allowance)
        vacuous = allowance > 0.0 and allowance >= bound
        self.checks[name] = {
            'value': value,
            'bound': bound,
            'allowance': allowance,
            'margin': bound + allowance - value,
            'vacuous': vacuous,
            'passed': bool(value <= bound + allowance and not vacuous),
        }

    def margins(self):
        return {name: c['margin'] for name, c in self.checks.items()}

    def to_record(self):
        return {
            'q': self.q,
            'mode': self.mode,
            'kind': self.kind,
            'norms': {k: v for k, v in self.measured.items() if isinstance(v, (int, float))},
            'deficit': self.deficit,
            'bound': self.bound,
            'eps_h': self.eps_h,
            'margins': self.margins(),
            'passed': self.passed,
            'timings': self.timings,
        }

    def to_dict(self):
        return asdict(self)


class CutoffData:
    """
    Level sets of ψ and the cut-offs built on them

    Ω_q = {ψ > 2δ_q}, Ω̃_q = {ψ > 3δ_q/2}; η_q is 1 on Ω_q and 0 outside Ω̃_q;
    ψ_q = η_q²δ_q + (1 − η_q²)ψ. Everything is cached per q.
    """

    def __init__(self, psi, sched, lipschitz_safety=1.1):
        self.psi = psi
        self.sched = sched
        self.grid = psi.grid
        grad = gradient(psi).values
        slope = float(np.max(np.sqrt(np.sum(grad ** 2, axis=0))[self.grid.interior]))
        self.lipschitz = max(slope, np.finfo(float).tiny) * lipschitz_safety
        self._cache = {}

    def delta(self, q):
        return math.exp(self.sched.log_delta(q))

    def _cached(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def omega(self, q):
        return self._cached(('omega', q),
                            lambda: self.grid.interior & (self.psi.values > 2.0 * self.delta(q)))

    def omega_tilde(self, q):
        return self._cached(('omega_tilde', q),
                            lambda: self.grid.interior & (self.psi.values > 1.5 * self.delta(q)))

    def eta(self, q):
        """η_q: indicator of {ψ > 7δ_q/4} mollified at radius (δ_q/4)/Lip(ψ)"""
        def build():
            d = self.delta(q)
            region = self.grid.interior & (self.psi.values > 1.75 * d)
            return ScalarField(self.grid, smooth_indicator(self.grid, region, 0.25 * d / self.lipschitz))
        return self._cached(('eta', q), build)

    def psi_q(self, q):
        def build():
            e2 = self.eta(q).values ** 2
            return ScalarField(self.grid, e2 * self.delta(q) + (1.0 - e2) * self.psi.values)
        return self._cached(('psi_q', q), build)

    def stage_eta(self, q):
        """Stage-local η: 1 where ψ ≥ 5δ_{q+1}/4, 0 where ψ ≤ δ_{q+1}"""
        def build():
            d = self.delta(q + 1)
            region = self.grid.interior & (self.psi.values > 1.125 * d)
            return ScalarField(self.grid, smooth_indicator(self.grid, region, 0.125 * d / self.lipschitz))
        return self._cached(('stage_eta', q), build)

    def eta_gradient_ratio(self, q):
        """sup|∇η_q|·δ_q, bounded when η_q transitions over a width comparable to δ_q"""
        return ck_norm(self.eta(q), 1, self.grid.interior) * self.delta(q)


@dataclass(frozen=True, eq=False)
class State:
    """
    Iterate of the construction

    Args:
        q (int): Stage index
        V (ScalarField): V_q
        W (VectorField): W_q
        bg (Background): Background data
        frame (Frame): Direction frame
        sched (Schedule): Schedule
        A (SymMatrixField): Working target (rescaled in the interior mode)
        options (StageOptions): Construction knobs
        cut (CutoffData, optional): Dirichlet-mode cut-offs
        rescale (tuple): Factors turning (V, W) into (v, w)
        modified (np.ndarray): Points written so far
    """

    q: int
    V: ScalarField
    W: VectorField
    bg: Background
    frame: Frame
    sched: Schedule
    A: SymMatrixField
    options: StageOptions
    cut: Optional[CutoffData] = None
    rescale: tuple = (1.0, 1.0)
    modified: Optional[np.ndarray] = None

    @property
    def grid(self):
        return self.V.grid

    def shift(self, q=None):
        """Identity shift of the deficit at stage q: δ_{q+1} or ψ_{q+1}"""
        q = self.q if q is None else q
        if self.cut is not None:
            return self.cut.psi_q(q + 1)
        return math.exp(self.sched.log_delta(q + 1))

    def deficit(self):
        return deficit(self.A, self.V, self.W, self.shift())

    def solution_fields(self):
        """(v, w) after the final rescale"""
        sv, sw = self.rescale
        return self.V * sv, self.W * sw


def _pair_norm(V, W, k, region):
    return ck_norm(V, k, region) + ck_norm(W, k, region)


def _eps_h(grid, options, frequency):
    return options.C_h * grid.h ** 2 * frequency ** 2


def _finish(report, options, partial=None):
    if report.passed:
        logger.info(f"{report.kind} q={report.q}: deficit {report.deficit:.4e} <= {report.bound:.4e}")
        return
    message = f"{report.kind} q={report.q} failed bounds: {', '.join(report.failures)}"
    if options.strict:
        raise StageAssertionError(message, report=report, partial=partial)
    logger.warning(message)


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------

def init_interior(bg, frame, sched, options=None):
    """
    Rescaled start of the interior mode

    Ā = δ₁τ⁻¹A, V₀ = δ₁^{1/2}τ^{−1/2}v^b, W₀ = 0; the solution is recovered as
    (δ₁^{−1/2}τ^{1/2}V, δ₁⁻¹τW).

    Args:
        bg (Background): Interior-mode background
        frame (Frame): Direction frame
        sched (Schedule): Schedule
        options (StageOptions, optional): Construction knobs

    Returns:
        tuple: (State at q = 0, DeficitReport of the initialization)

    Raises:
        StageAssertionError: if a q = 0 bound fails and options.strict is set
    """
    options = options or StageOptions()
    started = time.perf_counter()
    grid = bg.vb.grid
    region = grid.interior
    delta0 = math.exp(sched.log_delta(0))
    delta1 = math.exp(sched.log_delta(1))
    lambda0 = math.exp(sched.log_lambda(0))
    ratio = delta1 / bg.tau

    A_bar = bg.A * ratio
    V0 = bg.vb * math.sqrt(ratio)
    W0 = VectorField.zeros(grid)
    state = State(q=0, V=V0, W=W0, bg=bg, frame=frame, sched=sched, A=A_bar, options=options,
                  rescale=(1.0 / math.sqrt(ratio), 1.0 / ratio),
                  modified=np.zeros(grid.shape, dtype=bool))

    _, d_norm = state.deficit()
    report = DeficitReport(q=0, mode='interior', kind='init', deficit=d_norm,
                           bound=sched.sigma * delta1, eps_h=0.0)
    report.add_check('deficit', d_norm, sched.sigma * delta1)
    report.add_check('c1_norm', _pair_norm(V0, W0, 1, region), math.sqrt(sched.K))
    report.add_check('c2_norm', _pair_norm(V0, W0, 2, region), sched.K * math.sqrt(delta0) * lambda0)
    report.measured.update({'tau': bg.tau, 'scale_ratio': ratio})
    report.timings['total'] = time.perf_counter() - started
    _finish(report, options, partial={'state': state, 'reports': []})
    return state, report


def init_boundary(bg, frame, sched, options=None):
    """
    Dirichlet-mode start: N* steps with â_i = η₁(ψ − δ₁)^{1/2}d*_i at μ̂_i = base^i

    Args:
        bg (Background): Dirichlet-mode background
        frame (Frame): Direction frame
        sched (Schedule): Schedule
        options (StageOptions, optional): Construction knobs; hat_base overrides C/(σδ₁)

    Returns:
        tuple: (State at q = 0, DeficitReport of the initialization)

    Raises:
        ResolutionError: if μ̂_{N*} is not resolved
        StageAssertionError: if a q = 0 bound fails and options.strict is set
    """
    options = options or StageOptions()
    started = time.perf_counter()
    grid = bg.vb.grid
    region = grid.interior
    cut = CutoffData(bg.psi, sched, options.lipschitz_safety)
    delta0, delta1 = cut.delta(0), cut.delta(1)
    lambda0 = math.exp(sched.log_lambda(0))
    base = options.hat_base if options.hat_base is not None else sched.C_universal / (sched.sigma * delta1)
    mus = [base ** i for i in range(1, frame.N_star + 1)]
    check_resolution(grid, mus[-1], options.points_per_period)

    eta1 = cut.eta(1).values
    gap = np.sqrt(np.maximum(bg.psi.values - delta1, 0.0))
    amplitudes = np.stack([eta1 * gap * d for d in frame.d_star])
    V, W = sweep(bg.vb, bg.wb, amplitudes, frame, mus, options, 0)
    keep = cut.omega_tilde(1)
    state = State(q=0, V=V, W=W, bg=bg, frame=frame, sched=sched, A=bg.A, options=options, cut=cut,
                  modified=V.values != bg.vb.values)

    _, d_norm = state.deficit()
    eps_h = _eps_h(grid, options, mus[-1])
    report = DeficitReport(q=0, mode='dirichlet', kind='init', deficit=d_norm,
                           bound=sched.sigma * delta1, eps_h=eps_h)
    report.add_check('deficit', d_norm, sched.sigma * delta1, eps_h)
    report.add_check('c2_norm', _pair_norm(V, W, 2, region), sched.K * math.sqrt(delta0) * lambda0, eps_h)
    untouched = bool(np.array_equal(V.values[~keep], bg.vb.values[~keep]))
    report.add_check('untouched_outside', 0.0 if untouched else 1.0, 0.0)
    report.add_check('leak_outside', _leak(V, W, bg.vb, bg.wb, keep), 0.0)
    report.measured.update({
        'hat_base': base,
        'hat_frequencies': mus,
        'eta_gradient_ratio': cut.eta_gradient_ratio(1),
        'psi_lipschitz': cut.lipschitz,
    })
    report.timings['total'] = time.perf_counter() - started
    _finish(report, options, partial={'state': state, 'reports': []})
    return state, report


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

def sweep(V, W, amplitudes, frame, mus, options, key=0):
    """
    N* corrugation steps, step i along ξ_i at frequency mus[i]

    Each step uses the gradient left by the previous one, so the error it adds is
    of order a_i·Σ_{j<i} a_j μ_j/μ_i.

    Args:
        V (ScalarField): Starting scalar iterate
        W (VectorField): Starting vector iterate
        amplitudes (np.ndarray): a_1..a_{N*}, shape (N*, ...)
        frame (Frame): Direction frame
        mus (sequence): μ_1..μ_{N*}
        options (StageOptions): Resolution requirement and phases
        key (int): Phase key

    Returns:
        tuple: (V, W) after the last step

    Raises:
        ResolutionError: a frequency the grid cannot resolve
    """
    if len(mus) != frame.N_star:
        raise CorrugateError(f"sweep needs {frame.N_star} frequencies, got {len(mus)}")
    phases = options.phases(key, frame.N_star)
    grid = V.grid
    for i in range(frame.N_star):
        params = CorrugationParams(ScalarField(grid, amplitudes[i]), frame.xis[i], mus[i], phases[i])
        V, W = step(V, W, params, options.points_per_period)
    return V, W


def _measure_stage(report, st, V_new, W_new, seq, eps_h, molli_V):
    """Norm checks shared by both stage kinds"""
    sched = st.sched
    region = st.grid.interior
    dV = V_new - st.V
    dW = W_new - st.W
    root = math.sqrt(seq.delta_q1)
    c1 = ck_norm(dV, 1, region)
    c2 = ck_norm(dV, 2, region)
    report.add_check('c1_increment', c1 + ck_norm(dW, 1, region), sched.K * root, eps_h)
    report.add_check('c2_norm', _pair_norm(V_new, W_new, 2, region), sched.K * root * seq.lambda_q1, eps_h)
    report.add_check('holder_increment', holder_norm(dV, 1, sched.alpha, region),
                     sched.K * root * seq.lambda_q1 ** sched.alpha, eps_h)
    report.measured.update({
        'c0_increment': sup_norm(dV, region),
        'c1_increment_v': c1,
        'interpolation_bound': c1 ** (1.0 - sched.alpha) * c2 ** sched.alpha,
        'mollification_locality': ck_norm(molli_V - st.V, 1, region)
        / max(ck_norm(st.V, 2, region) * seq.l, np.finfo(float).tiny),
        'l': seq.l,
        'mu0': seq.mu0,
        'lambda_q1': seq.lambda_q1,
        'ladder_ratio': (seq.lambda_q1 / seq.mu0) ** (1.0 / st.frame.N_star),
    })
    telescoping = seq.l + seq.delta_q1 * (seq.mu0 / seq.mus[-1]) ** (1.0 / st.frame.N_star)
    realized = report.deficit / telescoping
    report.measured['realized_constant'] = realized
    if realized > sched.C_universal:
        logger.warning(f"Realized stage constant {realized:.4g} exceeds C_universal={sched.C_universal:.4g}")


def interior_stage(st):
    """
    One interior-mode stage q → q+1

    Mollify (V, W, A) at l, decompose D̃ = Ã − ½∇ṽ⊗∇ṽ − sym∇w̃ − δ_{q+2}Id as
    δ_{q+1}Σd_i²ξ_i⊗ξ_i, then corrugate along each ξ_i at μ_i starting from (ṽ, w̃).

    Args:
        st (State): Interior-mode state at q

    Returns:
        tuple: (State at q + 1, DeficitReport)

    Raises:
        StageAssertionError: failed bound with options.strict
        DecompositionError: mollified deficit outside the admissible ball inside the domain
        ResolutionError: λ_{q+1} not resolved
    """
    started = time.perf_counter()
    grid, sched, frame, options = st.grid, st.sched, st.frame, st.options
    seq = sequences(sched, st.q)
    check_resolution(grid, seq.mus[-1], options.points_per_period)

    v_m = mollify(st.V, seq.l)
    w_m = mollify(st.W, seq.l)
    A_m = mollify(st.A, seq.l)
    mollified_at = time.perf_counter()

    D_tilde = A_m - quadratic_form(v_m, w_m) - SymMatrixField.identity(grid, seq.delta_q2)
    strict = grid.interior if options.strict else None
    d, projected = decompose_field(frame, D_tilde.values / seq.delta_q1, strict)
    amplitudes = math.sqrt(seq.delta_q1) * d
    decomposed_at = time.perf_counter()

    V_new, W_new = sweep(v_m, w_m, amplitudes, frame, seq.mus[1:], options, st.q + 1)
    new_state = replace(st, q=st.q + 1, V=V_new, W=W_new,
                        modified=st.modified | (V_new.values != st.V.values))
    _, d_norm = new_state.deficit()

    eps_h = _eps_h(grid, options, seq.lambda_q1)
    report = DeficitReport(q=st.q + 1, mode='interior', kind='stage', deficit=d_norm,
                           bound=sched.sigma * seq.delta_q2, eps_h=eps_h)
    report.add_check('deficit', d_norm, sched.sigma * seq.delta_q2, eps_h)
    _measure_stage(report, st, V_new, W_new, seq, eps_h, v_m)
    report.measured['projected_points'] = int(np.count_nonzero(projected))
    report.measured['projected_inside'] = int(np.count_nonzero(projected & grid.interior))
    finished = time.perf_counter()
    report.timings.update({'mollify': mollified_at - started, 'decompose': decomposed_at - mollified_at,
                           'corrugate': finished - decomposed_at, 'total': finished - started})
    _finish(report, options, partial={'state': st})
    return new_state, report


def _leak(V_new, W_new, V, W, keep):
    """Largest change of (V, W) outside keep"""
    outside = ~keep
    if not np.any(outside):
        return 0.0
    dv = np.abs(V_new.values - V.values)[outside]
    dw = np.abs(W_new.values - W.values)[:, outside]
    return float(max(np.max(dv), np.max(dw)))


def _case_jump_ratio(a, case, grid):
    """Largest neighbor jump of a across the case interface over h·sup|∇a|"""
    grad = float(np.max(np.abs(gradient(ScalarField(grid, a)).values)))
    best = 0.0
    for axis in range(grid.n):
        head = [slice(None)] * grid.n
        tail = [slice(None)] * grid.n
        head[axis], tail[axis] = slice(1, None), slice(None, -1)
        head, tail = tuple(head), tuple(tail)
        across = case[head] != case[tail]
        if np.any(across):
            best = max(best, float(np.max(np.abs(a[head] - a[tail])[across])))
    return best / max(grid.h * grad, np.finfo(float).tiny)


def boundary_stage(st):
    """
    One dirichlet-mode stage q → q+1

    The deficit is glued as
    D̃ = η²(Ã − ½∇ṽ⊗∇ṽ − sym∇w̃ − δ_{q+2}Id) + (1 − η²)η_{q+2}²(ψ̃_{q+1} − δ_{q+2})Id.
    Where ψ ≥ δ_{q+1} the amplitudes come from decomposing D̃/s with
    s = η_{q+2}²(ψ̃_{q+1} − δ_{q+2}); elsewhere they are η_{q+2}(ψ̃_{q+1} − δ_{q+2})^{1/2}d*_i.
    Steps start from η²(ṽ, w̃) + (1 − η²)(V_q, W_q), and no point outside Ω̃_{q+2}
    is written.

    Args:
        st (State): Dirichlet-mode state at q

    Returns:
        tuple: (State at q + 1, DeficitReport)

    Raises:
        CutoffError: l > δ_{q+2}/(4‖ψ‖₁ + 1) with options.strict
        StageAssertionError: failed bound with options.strict
    """
    started = time.perf_counter()
    grid, sched, frame, options, cut = st.grid, st.sched, st.frame, st.options, st.cut
    region = grid.interior
    q = st.q
    seq = sequences(sched, q)
    check_resolution(grid, seq.mus[-1], options.points_per_period)

    psi_c1 = ck_norm(st.bg.psi, 1, region)
    cutoff_limit = seq.delta_q2 / (4.0 * psi_c1 + 1.0)
    if seq.l > cutoff_limit:
        message = f"mollification length {seq.l:.4g} exceeds cut-off limit {cutoff_limit:.4g} at q={q}"
        if options.strict:
            raise CutoffError(message)
        logger.warning(message)

    v_m = mollify(st.V, seq.l)
    w_m = mollify(st.W, seq.l)
    A_m = mollify(st.A, seq.l)
    psi_m = mollify(cut.psi_q(q + 1), seq.l).values
    mollified_at = time.perf_counter()

    eta2 = cut.stage_eta(q).values ** 2
    eta_next = cut.eta(q + 2).values
    outer_shift = eta_next ** 2 * (psi_m - seq.delta_q2)
    inner = A_m - quadratic_form(v_m, w_m) - SymMatrixField.identity(grid, seq.delta_q2)
    D_tilde = inner.values * eta2 + SymMatrixField.identity(grid, (1.0 - eta2) * outer_shift).values

    # Case split: decomposition where ψ ≥ δ_{q+1}, constant frame amplitudes elsewhere
    case1 = region & (st.bg.psi.values >= seq.delta_q1)
    s = np.where(case1, outer_shift, 1.0)
    s_safe = np.where(s > 0.0, s, 1.0)
    eye = SymMatrixField.identity(grid, 1.0).values
    normalized = np.where(case1[None], D_tilde / s_safe, eye)
    strict = case1 if options.strict else None
    d, projected = decompose_field(frame, normalized, strict)
    root_s = np.sqrt(np.maximum(s, 0.0))
    edge = eta_next * np.sqrt(np.maximum(psi_m - seq.delta_q2, 0.0))
    amplitudes = np.where(case1[None], root_s * d, edge * frame.d_star.reshape((-1,) + (1,) * grid.n))
    decomposed_at = time.perf_counter()

    v0 = ScalarField(grid, eta2 * v_m.values + (1.0 - eta2) * st.V.values)
    w0 = VectorField(grid, eta2 * w_m.values + (1.0 - eta2) * st.W.values)
    V_new, W_new = sweep(v0, w0, amplitudes, frame, seq.mus[1:], options, q + 1)
    keep = cut.omega_tilde(q + 2)
    leak = _leak(V_new, W_new, st.V, st.W, keep)
    new_state = replace(st, q=q + 1, V=V_new, W=W_new,
                        modified=st.modified | (V_new.values != st.V.values))
    _, d_norm = new_state.deficit()

    eps_h = _eps_h(grid, options, seq.lambda_q1)
    report = DeficitReport(q=q + 1, mode='dirichlet', kind='stage', deficit=d_norm,
                           bound=sched.sigma * seq.delta_q2, eps_h=eps_h)
    report.add_check('deficit', d_norm, sched.sigma * seq.delta_q2, eps_h)
    _measure_stage(report, st, V_new, W_new, seq, eps_h, v_m)
    untouched = bool(np.array_equal(V_new.values[~keep], st.bg.vb.values[~keep]))
    report.add_check('untouched_outside', 0.0 if untouched else 1.0, 0.0)
    report.add_check('leak_outside', leak, 0.0)

    eta2_full = eta2
    psi1 = cut.psi_q(q + 1).values
    chain = (eta2_full * seq.delta_q2 + (1.0 - eta2_full) * psi1
             - (1.0 - eta2_full) * eta_next ** 2 * (psi1 - seq.delta_q2))
    a_norm = np.sqrt(np.sum(amplitudes ** 2, axis=0))
    report.measured.update({
        'psi_chain_residual': float(np.max(np.abs(cut.psi_q(q + 2).values - chain)[region])),
        'case_jump_ratio': _case_jump_ratio(a_norm, case1, grid),
        'cutoff_limit': cutoff_limit,
        'projected_points': int(np.count_nonzero(projected)),
        'eta_gradient_ratio': cut.eta_gradient_ratio(q + 2),
    })
    finished = time.perf_counter()
    report.timings.update({'mollify': mollified_at - started, 'decompose': decomposed_at - mollified_at,
                           'corrugate': finished - decomposed_at, 'total': finished - started})
    _finish(report, options, partial={'state': st})
    return new_state, report


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Problem:
    """
    What to solve

    Args:
        grid (Grid): Discretization
        f (ScalarField): Right-hand side
        mode (str): 'interior' or 'dirichlet'
        vb (ScalarField, optional): Initial v^b of the interior mode
        g (callable, optional): Boundary data of the dirichlet mode
        theorem (str): 'positive' or 'general', dirichlet mode only
    """

    grid: Grid
    f: ScalarField
    mode: str = 'interior'
    vb: Optional[ScalarField] = None
    g: Optional[Callable] = None
    theorem: str = 'positive'


@dataclass
class Solution:
    """Outcome of a run"""

    v: ScalarField
    w: VectorField
    state: State
    reports: list
    norm_table: pd.DataFrame
    residual: object
    residual_history: list
    provenance: dict
    modified_mask: np.ndarray


def build_background(problem, sched):
    if problem.mode == 'interior':
        vb = problem.vb if problem.vb is not None else ScalarField.zeros(problem.grid)
        return build_background_interior(problem.f, vb, sched.K, sched.sigma)
    if problem.mode == 'dirichlet':
        return build_background_boundary(problem.f, problem.g, problem.theorem)
    raise CorrugateError(f"Unknown mode '{problem.mode}', expected 'interior' or 'dirichlet'")


def norm_table(reports):
    """Per-stage table of the measured quantities"""
    rows = []
    for r in reports:
        row = {'q': r.q, 'kind': r.kind, 'deficit': r.deficit, 'bound': r.bound, 'eps_h': r.eps_h,
               'passed': r.passed}
        for name, check in r.checks.items():
            row[name] = check['value']
        for name, value in r.measured.items():
            if isinstance(value, (int, float)):
                row[name] = value
        rows.append(row)
    return pd.DataFrame(rows)


def _residual(state, phis):
    v, _ = state.solution_fields()
    return weak_residual(v, state.bg.f, phis)


def run(problem, sched, frame, options=None, q_max=None, on_stage=None, bg=None):
    """
    Full construction: background, initialization, q_max stages, verification

    Args:
        problem (Problem): What to solve
        sched (Schedule): Schedule
        frame (Frame): Direction frame
        options (StageOptions, optional): Construction knobs
        q_max (int, optional): Stage count, sched.q_max by default
        on_stage (callable, optional): Called as on_stage(state, report) after init and every stage
        bg (Background, optional): Precomputed background data

    Returns:
        Solution: Fields, reports and provenance

    Raises:
        CorrugateError: any stage failure; ``partial`` on the exception holds the last
            good state and the reports collected so far
    """
    options = options or StageOptions()
    q_max = sched.q_max if q_max is None else q_max
    bg = bg or build_background(problem, sched)
    grid = problem.grid
    phis = random_test_functions(grid.domain, options.verify_count, options.verify_seed)

    reports = []
    history = []
    state = None
    try:
        if problem.mode == 'interior':
            state, report = init_interior(bg, frame, sched, options)
        else:
            state, report = init_boundary(bg, frame, sched, options)
        reports.append(report)
        history.append({'q': 0, **_summary(_residual(state, phis))})
        if on_stage:
            on_stage(state, report)

        advance = interior_stage if problem.mode == 'interior' else boundary_stage
        for _ in range(q_max):
            state, report = advance(state)
            reports.append(report)
            history.append({'q': state.q, **_summary(_residual(state, phis))})
            report.measured['residual_max_rel'] = history[-1]['max_rel']
            if on_stage:
                on_stage(state, report)
    except CorrugateError as e:
        partial = getattr(e, 'partial', None) or {}
        partial.setdefault('state', state)
        partial['reports'] = list(reports)
        if getattr(e, 'report', None) is not None:
            partial['reports'].append(e.report)
        e.partial = partial
        raise

    v, w = state.solution_fields()
    residual = weak_residual(v, bg.f, phis)
    region = grid.interior
    c0_gap = sup_norm(v - bg.vb, region)
    provenance = {
        'grid': grid.describe(),
        'mode': problem.mode,
        'frame': frame.to_dict(),
        'frame_text': frame_to_text(frame),
        'schedule': sched.to_dict(),
        'sequences': [_safe_sequence(sched, q) for q in range(q_max)],
        'background': bg.summary(),
        'options': asdict(options),
        'measured': {
            'c0_gap': c0_gap,
            'c0_budget': _c0_budget(sched, q_max, state.rescale[0]),
            'epsilon': options.epsilon,
            'realized_constant_max': max((r.measured.get('realized_constant', 0.0) for r in reports), default=0.0),
            'final_deficit': reports[-1].deficit,
        },
        'versions': {'numpy': np.__version__, 'scipy': scipy.__version__, 'pandas': pd.__version__},
    }
    checks = {'c0_closeness': _acceptance(c0_gap, options.epsilon)}
    if state.cut is not None:
        allowed = state.cut.omega_tilde(q_max + 1)
        band = grid.interior & (grid.level < 2.0 * grid.h)
        stray = int(np.count_nonzero(state.modified & ~allowed))
        checks['locality'] = _acceptance(stray, 0)
        provenance['measured'].update({
            'locality_ok': stray == 0,
            'trace_error': float(np.max(np.abs(v.values - bg.vb.values)[band])) if np.any(band) else 0.0,
        })
    provenance['checks'] = checks
    failed = [name for name, check in checks.items() if not check['passed']]
    if failed:
        message = f"run acceptance failed: {', '.join(failed)}"
        if options.strict:
            raise StageAssertionError(message, partial={'state': state, 'reports': list(reports)})
        logger.warning(message)
    return Solution(v=v, w=w, state=state, reports=reports, norm_table=norm_table(reports),
                    residual=residual, residual_history=history, provenance=provenance,
                    modified_mask=state.modified)


def _acceptance(value, bound):
    return {'value': float(value), 'bound': float(bound), 'passed': bool(value <= bound)}


def _summary(residual):
    return {'max_rel': residual.max_rel, 'mean_rel': residual.mean_rel, 'max_abs': residual.max_abs}


def _safe_sequence(sched, q):
    try:
        return sequences(sched, q).to_dict()
    except CorrugateError as e:
        return {'q': q, 'error': str(e)}


def _c0_budget(sched, q_max, scale):
    """σδ₁ + Σ_q Kδ_{q+1}^{1/2} in solution units"""
    total = sched.sigma * math.exp(sched.log_delta(1))
    total += sum(sched.K * math.exp(0.5 * sched.log_delta(q + 1)) for q in range(q_max))
    return total * scale
