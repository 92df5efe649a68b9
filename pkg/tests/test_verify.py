import numpy as np
import pytest

from core.errors import FieldError
from core.field import Grid, ScalarField, SymMatrixField, VectorField, gradient, make_domain, sym_grad
from core.verify import (
    L_operator, TestFunction, cofactor_matrix, deficit, divergence_forms, quadratic_form,
    random_test_functions, sigma2_classical, sigma2_cofactor, sigma2_matrix, weak_residual,
)


@pytest.fixture
def fine_square():
    return Grid.build(make_domain('square', 2), 128, 0.1)


def _half_norm_squared(grid):
    return ScalarField(grid, 0.5 * np.sum(grid.coords ** 2, axis=0))


def test_sigma2_of_constant_matrices():
    assert sigma2_matrix(np.eye(3)) == pytest.approx(6.0)
    C = 1.7
    assert sigma2_matrix(np.diag([2.0 * C, -2.0 * C])) == pytest.approx(-8.0 * C * C)


def test_sigma2_classical_on_polynomials(square_grid):
    x = square_grid.coords
    C = 2.0
    saddle = ScalarField(square_grid, C * (x[0] ** 2 - x[1] ** 2))
    assert np.allclose(sigma2_classical(saddle).values, -8.0 * C * C, atol=1e-6)
    affine = ScalarField(square_grid, 3.0 * x[0] - x[1] + 1.0)
    assert np.allclose(sigma2_classical(affine).values, 0.0, atol=1e-8)


def test_divergence_forms_agree(fine_square):
    x = fine_square.coords
    v = ScalarField(fine_square, np.sin(x[0]) * np.cos(0.5 * x[1]) + 0.3 * x[0] ** 2 * x[1])
    forms = divergence_forms(v)
    classical = sigma2_classical(v).values
    deep = fine_square.interior & (fine_square.level > 0.05)
    for name in ('cofactor', 'divergence', 'double_divergence'):
        assert np.max(np.abs(forms[name].values - classical)[deep]) < 1e-3, name


def test_L_annihilates_symmetric_gradients(square_grid, rng):
    x = square_grid.coords
    c = rng.uniform(-1.0, 1.0, size=4)
    w = VectorField(square_grid, np.stack([c[0] * np.sin(2.0 * x[0] + x[1]) + c[1] * x[1] ** 3,
                                           c[2] * np.cos(x[0] * x[1]) + c[3] * x[0] ** 2]))
    assert np.max(np.abs(L_operator(sym_grad(w)).values)) < 1e-8


def test_L_of_scaled_identity(square_grid):
    """L(ψId) = (2n − 2)Δψ"""
    x = square_grid.coords
    psi = x[0] ** 2 + 2.0 * x[1] ** 2
    L = L_operator(SymMatrixField.identity(square_grid, psi)).values
    assert np.allclose(L, 2.0 * 6.0, atol=1e-8)


def test_cofactor_of_test_function_is_analytic():
    phi = TestFunction(center=(0.5, 0.5), scale=0.3)
    point = np.array([0.55, 0.42])
    cof = sigma2_cofactor(phi, point)
    eps = 1e-5

    def second(i, j):
        ei, ej = np.eye(2)[i] * eps, np.eye(2)[j] * eps
        val = lambda p: float(phi.value(p.reshape(2, 1))[0])
        return (val(point + ei + ej) - val(point + ei - ej) - val(point - ei + ej) + val(point - ei - ej)) / (4 * eps * eps)

    H = np.array([[second(i, j) for j in range(2)] for i in range(2)])
    assert np.allclose(cof, cofactor_matrix(H), atol=1e-4)
    assert np.allclose(cof, cof.T)


def test_test_functions_stay_inside(disc_grid):
    phis = random_test_functions(disc_grid.domain, count=20, seed=3)
    assert len(phis) == 20
    assert all(phi.support_margin(disc_grid.domain) > 0.0 for phi in phis)
    again = random_test_functions(disc_grid.domain, count=20, seed=3)
    assert [p.center for p in phis] == [p.center for p in again]


def test_weak_residual_of_classical_solution(fine_square):
    """v = ½|x|² solves σ₂(∇²v) = n² − n classically"""
    v = _half_norm_squared(fine_square)
    f = ScalarField(fine_square, np.full(fine_square.shape, 2.0))
    phis = random_test_functions(fine_square.domain, count=8, seed=1)
    report = weak_residual(v, f, phis)
    assert report.max_rel < 0.05
    frame = report.to_frame()
    assert len(frame) == 8
    assert set(frame.columns) >= {'lhs', 'rhs', 'abs_error', 'rel_error', 'center', 'scale'}


def test_weak_residual_of_affine_function(fine_square):
    x = fine_square.coords
    v = ScalarField(fine_square, 2.0 * x[0] - x[1])
    f = ScalarField.zeros(fine_square)
    report = weak_residual(v, f, random_test_functions(fine_square.domain, count=4, seed=0))
    assert report.max_abs < 1e-3
    assert all(abs(e['rhs']) == 0.0 for e in report.entries)


def test_weak_residual_rejects_boundary_supports(square_grid):
    v = ScalarField.zeros(square_grid)
    phi = TestFunction(center=(0.05, 0.5), scale=0.2)
    with pytest.raises(FieldError):
        weak_residual(v, v, [phi])


def test_deficit_with_scalar_and_field_shift(square_grid):
    x = square_grid.coords
    V = ScalarField(square_grid, x[0])
    W = VectorField.zeros(square_grid)
    A = SymMatrixField.identity(square_grid, 1.0)
    D, norm = deficit(A, V, W, 0.25)
    # A − ½e₁⊗e₁ − ¼Id
    assert np.allclose(D.values[0], 0.25)
    assert np.allclose(D.values[2], 0.75)
    assert norm == pytest.approx(0.75)
    shift = ScalarField(square_grid, np.full(square_grid.shape, 0.25))
    _, same = deficit(A, V, W, shift)
    assert same == pytest.approx(norm)


def test_quadratic_form_of_gradient_pair(square_grid):
    x = square_grid.coords
    V = ScalarField(square_grid, x[0] + 2.0 * x[1])
    W = VectorField(square_grid, np.stack([x[0], np.zeros(square_grid.shape)]))
    Q = quadratic_form(V, W).values
    grad = gradient(V).values
    assert np.allclose(Q[0], 0.5 * grad[0] ** 2 + 1.0)
    assert np.allclose(Q[1], 0.5 * grad[0] * grad[1])
    assert np.allclose(Q[2], 0.5 * grad[1] ** 2)
