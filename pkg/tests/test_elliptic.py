import numpy as np
import pytest

from core.elliptic import (
    background_constant, background_tau, build_background_boundary, build_background_interior,
    select_background, solve_poisson_dirichlet,
)
from core.errors import ModeMisuseError, SolverError
from core.field import Grid, ScalarField, make_domain, sup_norm
from core.verify import L_operator, sigma2_classical


def _radius2(grid):
    return np.sum(grid.coords ** 2, axis=0)


def test_poisson_on_disc_recovers_paraboloid(disc_grid):
    """−2Δψ = 1 with ψ = 0 on the unit circle is ψ = (1 − r²)/8"""
    f = ScalarField(disc_grid, np.ones(disc_grid.shape))
    psi = solve_poisson_dirichlet(f, 0.0, coeff=2.0)
    exact = (1.0 - _radius2(disc_grid)) / 8.0
    inside = disc_grid.interior
    assert np.max(np.abs(psi.values - exact)[inside]) < 1e-5
    assert np.max(psi.values[inside]) == pytest.approx(0.125, abs=1e-3)


def test_poisson_with_nonzero_boundary_data(square_grid):
    """Harmonic data is reproduced: Δu = 0, u = x₀² − x₁² on the boundary"""
    g = lambda pts: pts[0] ** 2 - pts[1] ** 2
    u = solve_poisson_dirichlet(ScalarField.zeros(square_grid), g)
    x = square_grid.coords
    inside = square_grid.interior
    assert np.max(np.abs(u.values - (x[0] ** 2 - x[1] ** 2))[inside]) < 1e-6


def test_discrete_maximum_principle(disc_grid):
    x = disc_grid.coords
    rhs = ScalarField(disc_grid, np.exp(-10.0 * ((x[0] - 0.3) ** 2 + x[1] ** 2)))
    u = solve_poisson_dirichlet(rhs, 0.0)
    assert np.min(u.values[disc_grid.interior]) >= -1e-10


def test_zero_data_returns_zero(square_grid):
    u = solve_poisson_dirichlet(ScalarField.zeros(square_grid), 0.0)
    assert np.array_equal(u.values, np.zeros(square_grid.shape))


def test_zero_coefficient_is_rejected(square_grid):
    with pytest.raises(SolverError):
        solve_poisson_dirichlet(ScalarField.zeros(square_grid), 0.0, coeff=0.0)


@pytest.mark.slow
@pytest.mark.parametrize('domain', ['square', 'disc'])
def test_poisson_convergence_order(domain):
    errors = []
    for resolution in (16, 32, 64):
        grid = Grid.build(make_domain(domain, 2), resolution, 0.1)
        x = grid.coords
        if domain == 'square':
            exact = np.sin(np.pi * x[0]) * np.sin(np.pi * x[1])
            rhs = 2.0 * np.pi ** 2 * exact
            bc = 0.0
        else:
            exact = np.exp(x[0]) * np.cos(x[1]) + x[0] * x[1] ** 2
            rhs = -2.0 * x[0]
            bc = lambda pts: np.exp(pts[0]) * np.cos(pts[1]) + pts[0] * pts[1] ** 2
        u = solve_poisson_dirichlet(ScalarField(grid, rhs), bc)
        errors.append(float(np.max(np.abs(u.values - exact)[grid.interior])))
    if domain == 'square':
        orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    else:
        # Shortley-Weller errors are not monotone per refinement; the overall rate is second order
        orders = np.array([0.5 * np.log2(errors[0] / errors[-1])])
    assert np.all(orders >= 1.9), errors


def test_interior_background(square_grid):
    f = ScalarField(square_grid, np.ones(square_grid.shape))
    vb = ScalarField.zeros(square_grid)
    bg = build_background_interior(f, vb, K=2.0, sigma=0.05)
    assert bg.mode == 'interior'
    assert bg.tau == pytest.approx(background_tau(bg.u, vb, 2.0, 0.05))
    assert bg.tau > 100.0
    inside = square_grid.interior
    assert np.allclose(bg.A.values[0][inside], bg.u.values[inside] + bg.tau)
    assert np.allclose(bg.A.values[1], 0.0)
    assert sup_norm(bg.wb) == 0.0


def test_dirichlet_background_positive_theorem(disc_grid):
    f = ScalarField(disc_grid, np.ones(disc_grid.shape))
    bg = build_background_boundary(f, lambda pts: np.zeros(pts.shape[1:]), 'positive')
    inside = disc_grid.interior
    assert np.allclose(bg.vb.values, 0.0, atol=1e-12)
    assert np.min(bg.psi.values[inside]) > 0.0
    # −L(A) = f away from the boundary
    lhs = -L_operator(bg.A).values
    deep = _radius2(disc_grid) < 0.6
    assert np.max(np.abs(lhs - 1.0)[deep]) < 1e-4


def test_dirichlet_background_general_theorem(disc_grid):
    x = disc_grid.coords
    f = ScalarField(disc_grid, -5.0 + x[0])
    bg = build_background_boundary(f, theorem='general')
    assert bg.vb_constant >= 1.0
    source = f - sigma2_classical(bg.vb)
    assert np.min(source.values[disc_grid.interior]) > 0.0
    assert np.min(bg.psi.values[disc_grid.interior]) > 0.0


def test_positive_theorem_needs_positive_f(disc_grid):
    f = ScalarField(disc_grid, -np.ones(disc_grid.shape))
    with pytest.raises(ModeMisuseError):
        build_background_boundary(f, None, 'positive')
    with pytest.raises(ModeMisuseError):
        build_background_boundary(ScalarField(disc_grid, np.ones(disc_grid.shape)), None, 'unknown')


def test_background_constant_grows_with_negative_f(square_grid):
    assert background_constant(ScalarField(square_grid, np.ones(square_grid.shape))) == 1.0
    # −100 + 8C² must reach 10.1
    assert background_constant(ScalarField(square_grid, np.full(square_grid.shape, -100.0))) == 4.0


def test_select_background_is_a_saddle(square_grid):
    f = ScalarField(square_grid, np.full(square_grid.shape, -100.0))
    vb = select_background(f)
    s2 = sigma2_classical(vb).values[square_grid.interior]
    assert np.allclose(s2, -8.0 * 16.0, atol=1e-6)
