"""
Dirichlet Poisson solves and background data for both construction modes
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import sparse
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse import linalg as splinalg

from .errors import ModeMisuseError, SolverError
from .field import ScalarField, SymMatrixField, VectorField, ck_norm, gradient, sup_norm
from .verify import sigma2_classical, sigma2_matrix

logger = logging.getLogger('corrugate.elliptic')

# Largest system handed to the sparse direct solver when an iterative solve stalls
_DIRECT_LIMIT = 1_500_000


@dataclass(frozen=True, eq=False)
class Background:
    """
    Background data of a construction

    Args:
        mode (str): 'interior' or 'dirichlet'
        vb (ScalarField): v^b
        wb (VectorField): w^b (zero)
        A (SymMatrixField): Target matrix field
        f (ScalarField): Right-hand side
        psi (ScalarField, optional): Positive potential, dirichlet mode only
        tau (float, optional): Shift of the interior mode
        u (ScalarField, optional): Poisson solution of the interior mode
        g (callable, optional): Boundary data
        vb_constant (float, optional): C of v^b = C(x₁² − x₂²) when selected automatically
    """

    mode: str
    vb: ScalarField
    wb: VectorField
    A: SymMatrixField
    f: ScalarField
    psi: Optional[ScalarField] = None
    tau: Optional[float] = None
    u: Optional[ScalarField] = None
    g: Optional[Callable] = None
    vb_constant: Optional[float] = None

    def summary(self):
        grid = self.vb.grid
        out = {
            'mode': self.mode,
            'vb_c2': ck_norm(self.vb, 2, grid.interior),
            'f_sup': sup_norm(self.f, grid.interior),
        }
        if self.tau is not None:
            out['tau'] = self.tau
            out['u_sup'] = sup_norm(self.u, grid.interior)
        if self.psi is not None:
            out['psi_sup'] = sup_norm(self.psi, grid.interior)
            out['psi_c1'] = ck_norm(self.psi, 1, grid.interior)
        if self.vb_constant is not None:
            out['vb_constant'] = self.vb_constant
        return out


def _boundary_callable(bc, grid):
    """Boundary data as a function of points (n, m)"""
    if bc is None:
        return None
    if callable(bc):
        return bc
    if isinstance(bc, ScalarField):
        interp = RegularGridInterpolator(grid.axes, bc.values, method='linear',
                                         bounds_error=False, fill_value=None)
        return lambda pts: interp(np.asarray(pts).reshape(grid.n, -1).T).reshape(np.shape(pts)[1:])
    value = float(bc)
    return lambda pts: np.full(np.shape(pts)[1:], value)


def _assemble(grid, rhs_values, coeff, g):
    """
    Assemble −Δ_h u = rhs/coeff + boundary terms on interior nodes

    Shortley–Weller arms are used where an axis neighbor lies outside the domain.

    Returns:
        tuple: (matrix, right-hand side, interior multi-indices, symmetric flag)
    """
    interior = grid.interior
    count = int(interior.sum())
    index = -np.ones(grid.shape, dtype=np.int64)
    index[interior] = np.arange(count)
    multi = np.array(np.nonzero(interior))
    h = grid.h

    rows, cols, vals = [], [], []
    diag = np.zeros(count)
    b = rhs_values[interior] / coeff
    symmetric = True

    for axis in range(grid.n):
        thetas = {}
        neighbors = {}
        for sign in (-1, 1):
            nb = multi.copy()
            nb[axis] += sign
            nb_index = index[tuple(nb)]
            theta = np.ones(count)
            outside = np.nonzero(nb_index < 0)[0]
            for k in outside:
                point = grid.coords[(slice(None),) + tuple(multi[:, k])]
                theta[k] = grid.domain.axis_crossing(point, axis, sign, h)
            theta = np.clip(theta, 1e-6, 1.0)
            thetas[sign] = theta
            neighbors[sign] = (nb_index, outside)
        if not (np.all(thetas[-1] == 1.0) and np.all(thetas[1] == 1.0)):
            symmetric = False
        h_minus, h_plus = thetas[-1] * h, thetas[1] * h
        for sign, arm in ((-1, h_minus), (1, h_plus)):
            weight = 2.0 / ((h_minus + h_plus) * arm)
            diag += weight
            nb_index, outside = neighbors[sign]
            inner = nb_index >= 0
            rows.append(np.nonzero(inner)[0])
            cols.append(nb_index[inner])
            vals.append(-weight[inner])
            if outside.size and g is not None:
                # Boundary value at the crossing point moves to the right-hand side
                pts = grid.coords[(slice(None),) + tuple(multi[:, outside])].copy()
                pts[axis] += sign * arm[outside]
                b[outside] += weight[outside] * g(pts)

    rows.append(np.arange(count))
    cols.append(np.arange(count))
    vals.append(diag)
    matrix = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                               shape=(count, count))
    return matrix, b, multi, symmetric


def _iterative_solve(matrix, b, symmetric, tol):
    count = matrix.shape[0]
    rtol = tol / np.sqrt(count)
    if symmetric:
        x, info = splinalg.cg(matrix, b, rtol=rtol, atol=0.0, maxiter=20 * count)
        method = 'cg'
    else:
        try:
            ilu = splinalg.spilu(matrix.tocsc(), drop_tol=1e-6, fill_factor=20)
            precond = splinalg.LinearOperator(matrix.shape, ilu.solve)
        except RuntimeError:
            precond = None
        x, info = splinalg.bicgstab(matrix, b, rtol=rtol, atol=0.0, maxiter=20 * count, M=precond)
        method = 'bicgstab'
    return x, info, method


def solve_poisson_dirichlet(rhs, bc=None, coeff=1.0, tol=1e-10):
    """
    Solve coeff·Δu = −rhs in the domain with u = bc on the boundary

    The symmetric square case uses conjugate gradients; Shortley–Weller systems on
    curved boundaries use BiCGSTAB with an incomplete-LU preconditioner. A stalled
    iterative solve falls back to a sparse direct solve before giving up. The
    returned field is extended past the boundary by reflection about the boundary
    data.

    Args:
        rhs (ScalarField): Right-hand side on the domain
        bc: None (zero), a number, a callable of points (n, m) or a ScalarField
        coeff (float): Nonzero coefficient
        tol (float): Relative sup-norm residual tolerance

    Returns:
        ScalarField: The solution on the whole grid

    Raises:
        SolverError: if the residual stays above tolerance
    """
    if coeff == 0:
        raise SolverError("Poisson coefficient must be nonzero")
    grid = rhs.grid
    g = _boundary_callable(bc, grid)
    matrix, b, multi, symmetric = _assemble(grid, rhs.values, coeff, g)

    reference = float(np.max(np.abs(b))) if b.size else 0.0
    if reference == 0.0:
        logger.debug("Poisson solve with zero data returns zero")
        return ScalarField(grid, grid.reflect_extension(np.zeros(grid.shape), g))

    x, info, method = _iterative_solve(matrix, b, symmetric, tol)
    report = _residual_report(matrix, x, b, tol, method, info)
    if not report['converged'] and matrix.shape[0] <= _DIRECT_LIMIT:
        logger.warning(f"{method} stalled (info={info}, residual {report['residual']:.3e}); "
                       f"retrying with a direct solve")
        x = splinalg.spsolve(matrix.tocsc(), b)
        report = _residual_report(matrix, x, b, tol, 'direct', 0)
    if not report['converged']:
        raise SolverError(f"Poisson solve did not converge: residual {report['residual']:.3e} "
                          f"> allowed {report['allowed']:.3e}", report)
    logger.debug(f"Poisson solve ({report['method']}, {matrix.shape[0]} unknowns) "
                 f"residual {report['residual']:.3e}")

    values = np.zeros(grid.shape)
    values[tuple(multi)] = x
    return ScalarField(grid, grid.reflect_extension(values, g))


def _residual_report(matrix, x, b, tol, method, info):
    residual = float(np.max(np.abs(matrix @ x - b)))
    reference = float(np.max(np.abs(b)))
    # Round-off floor of the assembled operator
    floor = 64.0 * np.finfo(float).eps * float(abs(matrix).sum(axis=1).max()) * float(np.max(np.abs(x)))
    allowed = max(tol * reference, floor)
    return {
        'method': method,
        'info': int(info),
        'residual': residual,
        'relative_residual': residual / reference,
        'allowed': allowed,
        'unknowns': int(matrix.shape[0]),
        'converged': bool(np.isfinite(residual) and residual <= allowed),
    }


def background_tau(u, vb, K, sigma):
    """τ = (K + 1/σ)(‖u‖₀ + ‖v^b‖₂² + 100), norms over the domain"""
    grid = u.grid
    return (K + 1.0 / sigma) * (sup_norm(u, grid.interior) + ck_norm(vb, 2, grid.interior) ** 2 + 100.0)


def build_background_interior(f, vb_init, K, sigma, tol=1e-10):
    """
    Background of the interior mode: A = (u + τ)Id with −(2n−2)Δu = f, u = 0 on the boundary

    Args:
        f (ScalarField): Right-hand side
        vb_init (ScalarField): Smooth initial v^b
        K (float): Norm constant K > 1
        sigma (float): Deficit constant σ
        tol (float): Poisson tolerance

    Returns:
        Background: Interior-mode background
    """
    grid = f.grid
    coeff = 2.0 * grid.n - 2.0
    u = solve_poisson_dirichlet(f, 0.0, coeff, tol)
    tau = background_tau(u, vb_init, K, sigma)
    A = SymMatrixField.identity(grid, u.values + tau)
    logger.info(f"Interior background: tau={tau:.6g}, |u|_0={sup_norm(u, grid.interior):.6g}")
    return Background(mode='interior', vb=vb_init, wb=VectorField.zeros(grid), A=A, f=f,
                      tau=tau, u=u)


def background_constant(f, margin=None):
    """
    Smallest power of two C with f − σ₂(∇²(C(x₁² − x₂²))) ≥ margin on the domain

    Args:
        f (ScalarField): Right-hand side
        margin (float, optional): Required gap, 0.1‖f‖₀ + 0.1 by default

    Returns:
        float: The constant C
    """
    grid = f.grid
    f_min = float(np.min(f.values[grid.interior]))
    if margin is None:
        margin = 0.1 * sup_norm(f, grid.interior) + 0.1
    C = 1.0
    while True:
        H = np.zeros((grid.n, grid.n))
        H[0, 0], H[1, 1] = 2.0 * C, -2.0 * C
        s2 = float(sigma2_matrix(H))
        if not s2 < 0.0:
            raise ModeMisuseError(f"σ₂ of the selected background is not negative ({s2})")
        if f_min - s2 >= margin:
            return C
        C *= 2.0


def select_background(f, margin=None):
    """
    v^b = C(x₁² − x₂²) with the smallest admissible power-of-two C

    Args:
        f (ScalarField): Right-hand side
        margin (float, optional): Required gap, see background_constant

    Returns:
        ScalarField: The background function
    """
    C = background_constant(f, margin)
    return ScalarField.sample(f.grid, _saddle(C))


def _saddle(C):
    return lambda x: C * (x[0] ** 2 - x[1] ** 2)


def build_background_boundary(f, g=None, theorem='positive', margin=None, tol=1e-10):
    """
    Background of the dirichlet mode: harmonic v^b, positive ψ and A = ψId + ½∇v^b⊗∇v^b

    Args:
        f (ScalarField): Right-hand side
        g (callable, optional): Boundary data; required for theorem 'positive'
        theorem (str): 'positive' (f > 0, given g) or 'general' (any f, v^b selected)
        margin (float, optional): Gap used by select_background
        tol (float): Poisson tolerance

    Returns:
        Background: Dirichlet-mode background

    Raises:
        ModeMisuseError: if f − σ₂(∇²v^b) fails to be positive
    """
    grid = f.grid
    interior = grid.interior
    vb_constant = None
    if theorem == 'general':
        vb_constant = background_constant(f, margin)
        g = _saddle(vb_constant)
        vb = ScalarField(grid, grid.extend(g(grid.coords)))
    elif theorem == 'positive':
        f_min = float(np.min(f.values[interior]))
        if f_min <= 0.0:
            raise ModeMisuseError(f"theorem 'positive' needs f > 0, got min f = {f_min:.6g}")
        g = _boundary_callable(g if g is not None else 0.0, grid)
        vb = solve_poisson_dirichlet(ScalarField.zeros(grid), g, 1.0, tol)
    else:
        raise ModeMisuseError(f"Unknown theorem '{theorem}', expected 'positive' or 'general'")

    source = f - sigma2_classical(vb)
    worst = float(np.min(source.values[interior]))
    if worst <= 0.0:
        raise ModeMisuseError(f"f − σ₂(∇²v^b) must be positive in the domain, min is {worst:.6g}")

    coeff = 2.0 * grid.n - 2.0
    psi = solve_poisson_dirichlet(source, 0.0, coeff, tol)
    psi_min = float(np.min(psi.values[interior]))
    if psi_min <= 0.0:
        raise ModeMisuseError(f"ψ must be positive inside the domain, min is {psi_min:.6g}")

    A = SymMatrixField.identity(grid, psi.values) + SymMatrixField.outer(gradient(vb)) * 0.5
    logger.info(f"Dirichlet background ({theorem}): min source {worst:.6g}, "
                f"|psi|_0={sup_norm(psi, interior):.6g}")
    return Background(mode='dirichlet', vb=vb, wb=VectorField.zeros(grid), A=A, f=f,
                      psi=psi, g=g, vb_constant=vb_constant)
