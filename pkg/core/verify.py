"""
Independent verification of constructed solutions

Classical σ₂, the double-divergence operator L, the very-weak residual against
compactly supported bumps, and deficit assembly. Nothing here is used to build
a solution; the construction calls these only to measure itself.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from .errors import FieldError
from .field import (
    ScalarField, SymMatrixField, _diff, gradient, hessian, sup_norm,
    sym_grad, sym_index_pairs,
)
from .utils import make_rng, thread_count

logger = logging.getLogger('corrugate.verify')


def sigma2_matrix(H):
    """
    (tr H)² − |H|² for matrices stacked on the leading two axes

    Args:
        H (np.ndarray): Shape (n, n, ...)

    Returns:
        np.ndarray: Shape H.shape[2:]
    """
    H = np.asarray(H, dtype=float)
    tr = np.trace(H, axis1=0, axis2=1)
    return tr * tr - np.sum(H * H, axis=(0, 1))


def sigma2_classical(v):
    """
    Pointwise σ₂(∇²v) = Σ_ij ∂_ii v ∂_jj v − (∂_ij v)²

    Args:
        v (ScalarField): Field with a discrete Hessian

    Returns:
        ScalarField: σ₂ of the discrete Hessian
    """
    return ScalarField(v.grid, sigma2_matrix(hessian(v).full()))


def L_operator(A):
    """
    L(A) = Σ_ij ∂_ii A_jj + ∂_jj A_ii − 2∂_ij A_ij = 2Δ tr A − 2Σ_ij ∂_ij A_ij

    Axis differences commute exactly, so L annihilates symmetric gradients up to
    rounding.

    Args:
        A (SymMatrixField): Matrix field

    Returns:
        ScalarField: L(A)
    """
    g = A.grid
    h, n = g.h, g.n
    tr = A.trace().values
    laplace_tr = sum(_diff(_diff(tr, i, h), i, h) for i in range(n))
    double_div = np.zeros(g.shape)
    for k, (i, j) in enumerate(sym_index_pairs(n)):
        term = _diff(_diff(A.values[k], j, h), i, h)
        double_div += term if i == j else 2.0 * term
    return ScalarField(g, 2.0 * laplace_tr - 2.0 * double_div)


def divergence_forms(v):
    """
    σ₂(∇²v) in its three equivalent forms

    Returns:
        dict: 'cofactor' Σσ^{ij}(∇²v)∂_ij v, 'divergence' Σ_i ∂_i(σ^{ij}(∇²v)∂_j v),
              'double_divergence' −½L(∇v⊗∇v)
    """
    g = v.grid
    H = hessian(v).full()
    cof = cofactor_matrix(H)
    grad = gradient(v).values
    cofactor = np.sum(cof * H, axis=(0, 1))
    flux = np.einsum('ij...,j...->i...', cof, grad)
    divergence = sum(_diff(flux[i], i, g.h) for i in range(g.n))
    double = -0.5 * L_operator(SymMatrixField.outer(gradient(v))).values
    return {
        'cofactor': ScalarField(g, cofactor),
        'divergence': ScalarField(g, divergence),
        'double_divergence': ScalarField(g, double),
    }


def cofactor_matrix(H):
    """σ₂^{ij}(H) = tr(H)δ_ij − H_ij for matrices on the leading two axes"""
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    tr = np.trace(H, axis1=0, axis2=1)
    eye = np.eye(n).reshape((n, n) + (1,) * (H.ndim - 2))
    return eye * tr - H


@dataclass(frozen=True)
class TestFunction:
    """
    Bump φ(x) = exp(−1/(1−|x−center|²/scale²)) with analytic derivatives

    Args:
        center (tuple): Center point
        scale (float): Support radius
    """

    __test__ = False

    center: tuple
    scale: float
    profile: str = 'bump'

    def _s(self, points):
        y = np.asarray(points, dtype=float) - np.asarray(self.center, dtype=float).reshape(
            (-1,) + (1,) * (np.ndim(points) - 1))
        return y, np.sum(y * y, axis=0) / self.scale ** 2

    def value(self, points):
        _, s = self._s(points)
        inside = s < 1.0
        safe = np.where(inside, s, 0.0)
        return np.where(inside, np.exp(-1.0 / (1.0 - safe)), 0.0)

    def gradient(self, points):
        y, s = self._s(points)
        inside = s < 1.0
        safe = np.where(inside, s, 0.0)
        phi = np.where(inside, np.exp(-1.0 / (1.0 - safe)), 0.0)
        dphi = -phi / (1.0 - safe) ** 2
        return dphi * 2.0 * y / self.scale ** 2

    def hessian(self, points):
        """Analytic Hessian, shape (n, n, ...)"""
        y, s = self._s(points)
        inside = s < 1.0
        safe = np.where(inside, s, 0.0)
        phi = np.where(inside, np.exp(-1.0 / (1.0 - safe)), 0.0)
        d1 = -phi / (1.0 - safe) ** 2
        d2 = phi * (2.0 * safe - 1.0) / (1.0 - safe) ** 4
        n = y.shape[0]
        z = 2.0 * y / self.scale ** 2
        out = d2 * z[:, None] * z[None, :]
        for i in range(n):
            out[i, i] = out[i, i] + d1 * 2.0 / self.scale ** 2
        return out

    def support_margin(self, domain):
        """Distance from the support to the boundary (positive when strictly inside)"""
        return float(domain.level(np.asarray(self.center, dtype=float).reshape(-1, 1))[0]) - self.scale

    def to_dict(self):
        return {'center': list(self.center), 'scale': self.scale, 'profile': self.profile}


def sigma2_cofactor(phi, x):
    """
    σ₂^{ij}(∇²φ) = Δφ δ_ij − ∂_ij φ evaluated analytically

    Args:
        phi (TestFunction): Test function
        x (np.ndarray): Points, shape (n,) or (n, ...)

    Returns:
        np.ndarray: Shape (n, n) or (n, n, ...)
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x.reshape(-1, 1) if single else x
    cof = cofactor_matrix(phi.hessian(pts))
    return cof[..., 0] if single else cof


def random_test_functions(domain, count=16, seed=0, min_scale=0.08, max_scale=0.3):
    """
    Bumps with random centers and radii, supports strictly inside the domain

    Args:
        domain (Domain): Domain hosting the supports
        count (int): Number of test functions
        seed (int): Generator seed
        min_scale (float): Smallest radius, relative to the domain size
        max_scale (float): Largest radius, relative to the domain size

    Returns:
        list: TestFunction instances
    """
    rng = make_rng(seed)
    size = float(np.max(domain.upper - domain.lower))
    phis = []
    attempts = 0
    while len(phis) < count:
        attempts += 1
        if attempts > 1000 * count:
            raise FieldError("Could not place test functions inside the domain")
        center = rng.uniform(domain.lower, domain.upper)
        scale = rng.uniform(min_scale, max_scale) * size
        phi = TestFunction(center=tuple(float(c) for c in center), scale=float(scale))
        if phi.support_margin(domain) > 0.02 * size:
            phis.append(phi)
    return phis


@dataclass
class ResidualReport:
    """Per-test-function record of the very-weak identity"""

    entries: list = field(default_factory=list)

    @property
    def max_abs(self):
        return max((e['abs_error'] for e in self.entries), default=0.0)

    @property
    def max_rel(self):
        return max((e['rel_error'] for e in self.entries), default=0.0)

    @property
    def mean_rel(self):
        return float(np.mean([e['rel_error'] for e in self.entries])) if self.entries else 0.0

    def to_frame(self):
        return pd.DataFrame(self.entries)

    def to_dict(self):
        return {
            'entries': self.entries,
            'max_abs': self.max_abs,
            'max_rel': self.max_rel,
            'mean_rel': self.mean_rel,
        }


def _support_window(grid, phi):
    lo = np.asarray(phi.center) - phi.scale
    hi = np.asarray(phi.center) + phi.scale
    slices = []
    for k in range(grid.n):
        start = max(int(np.floor((lo[k] - grid.origin[k]) / grid.h)) - 1, 0)
        stop = min(int(np.ceil((hi[k] - grid.origin[k]) / grid.h)) + 2, grid.shape[k])
        slices.append(slice(start, stop))
    return tuple(slices)


def _integrate(values, h, n):
    out = values
    for _ in range(n):
        out = trapezoid(out, dx=h, axis=0)
    return float(out)


def _residual_entry(grid, grad_v, f_values, phi, index):
    window = _support_window(grid, phi)
    pts = grid.coords[(slice(None),) + window]
    cof = cofactor_matrix(phi.hessian(pts))
    gv = grad_v[(slice(None),) + window]
    integrand = -np.einsum('ij...,i...,j...->...', cof, gv, gv)
    weight = phi.value(pts)
    rhs_integrand = f_values[window] * weight
    lhs = _integrate(integrand, grid.h, grid.n)
    rhs = _integrate(rhs_integrand, grid.h, grid.n)
    scale = max(abs(rhs), _integrate(np.abs(rhs_integrand), grid.h, grid.n),
                _integrate(np.abs(integrand), grid.h, grid.n), np.finfo(float).tiny)
    err = abs(lhs - rhs)
    return {'index': index, 'lhs': lhs, 'rhs': rhs, 'abs_error': err, 'rel_error': err / scale}


def weak_residual(v, f, phis):
    """
    Both sides of −Σ∫σ₂^{ij}(∇²φ)∂_i v ∂_j v = ∫fφ for each test function

    Only first derivatives of v enter. The relative error divides by the larger
    of |∫fφ| and the absolute masses of both integrands.

    Args:
        v (ScalarField): Candidate solution
        f (ScalarField): Right-hand side
        phis (list): TestFunction instances with supports inside the domain

    Returns:
        ResidualReport: Per-function and aggregate errors

    Raises:
        FieldError: if a support touches the boundary
    """
    grid = v.grid
    if f.grid is not grid:
        raise FieldError("v and f live on different grids")
    for phi in phis:
        if phi.support_margin(grid.domain) <= 0.0:
            raise FieldError(f"Test function support touches the boundary: center {phi.center}, "
                             f"scale {phi.scale}")
    grad_v = gradient(v).values
    with ThreadPoolExecutor(max_workers=max(1, min(thread_count(), len(phis) or 1))) as pool:
        futures = [pool.submit(_residual_entry, grid, grad_v, f.values, phi, k)
                   for k, phi in enumerate(phis)]
        entries = [fut.result() for fut in futures]
    for entry, phi in zip(entries, phis):
        entry.update(phi.to_dict())
    report = ResidualReport(entries)
    logger.debug(f"Weak residual over {len(phis)} test functions: max rel {report.max_rel:.3e}")
    return report


def quadratic_form(V, W):
    """½∇V⊗∇V + sym∇W"""
    return SymMatrixField.outer(gradient(V)) * 0.5 + sym_grad(W)


def deficit(A, V, W, shift=0.0):
    """
    D = A − ½∇V⊗∇V − sym∇W − shift·Id and its sup norm over the domain

    Args:
        A (SymMatrixField): Target matrix field
        V (ScalarField): Scalar iterate
        W (VectorField): Vector iterate
        shift: Constant or ScalarField multiplying the identity

    Returns:
        tuple: (SymMatrixField, float)
    """
    grid = A.grid
    shift_values = shift.values if isinstance(shift, ScalarField) else float(shift)
    D = A - quadratic_form(V, W) - SymMatrixField.identity(grid, shift_values)
    return D, sup_norm(D, grid.interior)
