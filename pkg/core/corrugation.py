"""
Corrugation profiles and the single-direction corrugation step

Γ₁(s, t) = (s/π) sin(2πt) and Γ₂(s, t) = −(s²/4π) sin(4πt) satisfy
∂_tΓ₂ + ½(∂_tΓ₁)² = s², which is what makes one step add a²ξ⊗ξ to
½∇v⊗∇v + sym∇w up to an explicit error.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import CorrugateError, FieldError, ResolutionError
from .field import ScalarField, SymMatrixField, VectorField, gradient, hessian, sym_index_pairs

logger = logging.getLogger('corrugate.corrugation')

DEFAULT_POINTS_PER_PERIOD = 16


class DerivativeOrderError(CorrugateError, ValueError):
    """Requested derivative of Γ that is not provided"""


@dataclass(frozen=True, eq=False)
class CorrugationParams:
    """
    Amplitude, direction and frequency of one step

    Args:
        a (ScalarField): Nonnegative amplitude
        xi (np.ndarray): Unit direction
        mu (float): Frequency
        phase (float): Shift of the oscillation variable t
    """

    a: ScalarField
    xi: np.ndarray
    mu: float
    phase: float = 0.0

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        if not self.mu > 0:
            raise FieldError(f"Corrugation frequency must be positive, got {self.mu}")
        if abs(np.linalg.norm(xi) - 1.0) > 1e-12:
            raise FieldError(f"Corrugation direction must be a unit vector, |xi|={np.linalg.norm(xi)}")
        if np.min(self.a.values) < 0.0:
            raise FieldError("Corrugation amplitude must be nonnegative")
        object.__setattr__(self, 'xi', xi)

    def t(self):
        """Oscillation variable μ x·ξ + phase on the grid"""
        coords = self.a.grid.coords
        return self.mu * np.tensordot(self.xi, coords, axes=(0, 0)) + self.phase


# ∂_t^k sin(ωt) = ω^k · _SHIFTED[k % 4](ωt)
_SHIFTED = (np.sin, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x))


def gamma(s, t, ds=0, dt=0):
    """
    Closed-form partial derivatives ∂_s^ds ∂_t^dt of (Γ₁, Γ₂)

    ∂_s²Γ₁ is identically zero and is returned as such.

    Args:
        s: Amplitude values
        t: Oscillation variable values
        ds (int): Order in s, 0..2
        dt (int): Order in t, 0..3

    Returns:
        tuple: (Γ₁ derivative, Γ₂ derivative)

    Raises:
        DerivativeOrderError: for orders outside the supported range
    """
    if ds not in (0, 1, 2) or dt not in (0, 1, 2, 3):
        raise DerivativeOrderError(f"Unsupported derivative order ds={ds}, dt={dt}")
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    two_pi, four_pi = 2.0 * np.pi, 4.0 * np.pi
    s1 = (s / np.pi, np.ones_like(s) / np.pi, np.zeros_like(s))[ds]
    s2 = (s * s / four_pi, s / two_pi, np.ones_like(s) / two_pi)[ds]
    g1 = s1 * two_pi ** dt * _SHIFTED[dt](two_pi * t)
    g2 = -s2 * four_pi ** dt * _SHIFTED[dt](four_pi * t)
    return g1, g2


def gamma1(s, t, ds=0, dt=0):
    if ds > 1:
        raise DerivativeOrderError(f"Γ₁ supports ds <= 1, got {ds}")
    return gamma(s, t, ds, dt)[0]


def gamma2(s, t, ds=0, dt=0):
    return gamma(s, t, ds, dt)[1]


def gamma_bounds(s, dt):
    """Sharp sup bounds of |∂_t^dt Γ₁| and |∂_t^dt Γ₂| at amplitude s"""
    s = abs(float(s))
    return (2.0 * np.pi) ** dt * s / np.pi, (4.0 * np.pi) ** dt * s * s / (4.0 * np.pi)


def check_resolution(grid, mu, points_per_period=DEFAULT_POINTS_PER_PERIOD):
    """
    Raise when fewer than ``points_per_period`` samples cover one oscillation

    Raises:
        ResolutionError: frequency exceeds grid
    """
    if grid.h * mu * points_per_period > 1.0 + 1e-12:
        raise ResolutionError(f"frequency exceeds grid: mu={mu:.6g} needs h <= "
                              f"{1.0 / (mu * points_per_period):.3g}, grid has h={grid.h:.3g}")


def step(v, w, p, points_per_period=DEFAULT_POINTS_PER_PERIOD):
    """
    One corrugation step

    v' = v + Γ₁(a, t)/μ and w' = w − (Γ₁(a, t)/μ)∇v + (Γ₂(a, t)/μ)ξ with t = μx·ξ + phase.
    Where a = 0 the output is bit-identical to the input.

    Args:
        v (ScalarField): Scalar iterate
        w (VectorField): Vector iterate
        p (CorrugationParams): Step parameters
        points_per_period (int): Resolution requirement

    Returns:
        tuple: (v', w')

    Raises:
        ResolutionError: frequency exceeds grid
    """
    grid = v.grid
    active = p.a.values > 0.0
    if not np.any(active):
        return v, w
    check_resolution(grid, p.mu, points_per_period)

    t = p.t()
    g1, g2 = gamma(p.a.values, t)
    grad_v = gradient(v).values
    v_new = np.where(active, v.values + g1 / p.mu, v.values)
    w_new = w.values - (g1 / p.mu) * grad_v + (g2 / p.mu) * p.xi.reshape((-1,) + (1,) * grid.n)
    w_new = np.where(active[None], w_new, w.values)
    return ScalarField(grid, v_new), VectorField(grid, w_new)


def step_error(v, w, p, v_new=None, w_new=None):
    """
    Analytic error of a step

    𝓔 = (1/μ)Γ₁∇²v − (1/μ)[∂_sΓ₂ + ∂_sΓ₁∂_tΓ₁] sym(∇a⊗ξ) − (1/2μ²)(∂_sΓ₁)²∇a⊗∇a,
    so that a²ξ⊗ξ + Q(v, w) − Q(v', w') = 𝓔 with Q(v, w) = ½∇v⊗∇v + sym∇w.
    The step outputs are accepted for signature symmetry; the formula only needs
    the pre-step field.

    Args:
        v (ScalarField): Pre-step scalar iterate
        w (VectorField): Pre-step vector iterate
        p (CorrugationParams): Step parameters

    Returns:
        SymMatrixField: 𝓔
    """
    grid = v.grid
    n = grid.n
    a = p.a.values
    t = p.t()
    g1, _ = gamma(a, t)
    ds1, ds2 = gamma(a, t, ds=1)
    dt1, _ = gamma(a, t, dt=1)
    grad_a = gradient(p.a).values
    hess_v = hessian(v).values
    mixed = (ds2 + ds1 * dt1) / p.mu
    quad = 0.5 * ds1 * ds1 / p.mu ** 2
    comps = []
    for k, (i, j) in enumerate(sym_index_pairs(n)):
        sym_term = 0.5 * (grad_a[i] * p.xi[j] + grad_a[j] * p.xi[i])
        comps.append(g1 / p.mu * hess_v[k] - mixed * sym_term - quad * grad_a[i] * grad_a[j])
    return SymMatrixField(grid, np.stack(comps))


def rank_one(a, xi):
    """a²ξ⊗ξ as a matrix field"""
    grid = a.grid
    xi = np.asarray(xi, dtype=float)
    a2 = a.values ** 2
    return SymMatrixField(grid, np.stack([a2 * xi[i] * xi[j] for i, j in sym_index_pairs(grid.n)]))
