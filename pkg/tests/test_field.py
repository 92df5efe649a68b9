import numpy as np
import pytest

from core.errors import FieldError
from core.field import (
    COLLAR, EXTERIOR, INTERIOR, Grid, ScalarField, SymMatrixField, VectorField, ck_norm,
    commutator_norm, gradient, hessian, holder_seminorm, jacobian, make_domain, mollification_report,
    mollify, smooth_indicator, sup_norm, sym_grad,
)


def _smooth_vector(grid, rng):
    x = grid.coords
    coeffs = rng.uniform(-1.0, 1.0, size=(grid.n, 3))
    comps = [c[0] * np.sin(2.0 * x[0] + c[1]) * np.cos(1.5 * x[1]) + c[2] * x[0] * x[1] for c in coeffs]
    return VectorField(grid, np.stack(comps))


def test_grid_build_covers_domain_and_collar():
    grid = Grid.build(make_domain('square', 2), 20, 0.12)
    assert grid.h == pytest.approx(0.05)
    assert grid.pad >= 0.12
    assert grid.shape[0] == 20 + 1 + 2 * 3
    assert np.all(grid.bbox[:, 0] <= -0.12 + 1e-12)
    codes = set(np.unique(grid.mask).tolist())
    assert codes <= {EXTERIOR, INTERIOR, COLLAR}
    assert INTERIOR in codes and COLLAR in codes


def test_grid_rejects_bad_parameters():
    with pytest.raises(FieldError):
        Grid.build(make_domain('square', 2), 3, 0.1)
    with pytest.raises(FieldError):
        Grid.build(make_domain('disc', 2), 16, 0.0)
    with pytest.raises(FieldError):
        make_domain('torus', 2)


def test_disc_level_is_positive_inside(disc_grid):
    level = disc_grid.level
    r = np.sqrt(np.sum(disc_grid.coords ** 2, axis=0))
    assert np.all(level[r < 0.9] > 0.0)
    assert np.all(level[r > 1.01] < 0.0)


def test_field_rejects_wrong_shape_and_non_finite(square_grid):
    with pytest.raises(FieldError):
        ScalarField(square_grid, np.zeros((3, 3)))
    values = np.zeros(square_grid.shape)
    values[0, 0] = np.nan
    with pytest.raises(FieldError):
        ScalarField(square_grid, values)


def test_fields_on_different_grids_do_not_mix(square_grid, disc_grid):
    with pytest.raises(FieldError):
        ScalarField.zeros(square_grid) + ScalarField.zeros(disc_grid)


def test_gradient_and_hessian_exact_on_quadratics(square_grid):
    x = square_grid.coords
    f = ScalarField(square_grid, x[0] ** 2 + 3.0 * x[0] * x[1] - 0.5 * x[1] ** 2)
    grad = gradient(f).values
    assert np.allclose(grad[0], 2.0 * x[0] + 3.0 * x[1], atol=1e-10)
    assert np.allclose(grad[1], 3.0 * x[0] - x[1], atol=1e-10)
    H = hessian(f).values
    assert np.allclose(H[0], 2.0, atol=1e-8)
    assert np.allclose(H[1], 3.0, atol=1e-8)
    assert np.allclose(H[2], -1.0, atol=1e-8)


def test_hessian_matches_repeated_gradient(square_grid):
    x = square_grid.coords
    f = ScalarField(square_grid, np.sin(x[0]) * np.exp(0.5 * x[1]))
    g = gradient(f)
    repeated = jacobian(g)
    expected = 0.5 * (repeated[0, 1] + repeated[1, 0])
    assert np.allclose(hessian(f).values[1], expected, atol=1e-10)


def test_sym_grad_is_symmetrized_jacobian(square_grid, rng):
    w = _smooth_vector(square_grid, rng)
    J = jacobian(w)
    S = sym_grad(w).full()
    assert np.allclose(S, 0.5 * (J + J.transpose(1, 0, 2, 3)), atol=1e-14)


def test_differential_operators_are_linear(square_grid, rng):
    a, b = rng.uniform(-2.0, 2.0, size=2)
    u = _smooth_vector(square_grid, rng)
    v = _smooth_vector(square_grid, rng)
    combined = sym_grad(u * a + v * b).values
    assert np.allclose(combined, a * sym_grad(u).values + b * sym_grad(v).values, atol=1e-12)


def test_mollify_preserves_constants(square_grid):
    f = ScalarField(square_grid, np.full(square_grid.shape, 2.5))
    smoothed = mollify(f, 0.2)
    assert np.allclose(smoothed.values, 2.5, atol=1e-12)


def test_mollify_is_linear(square_grid, rng):
    x = square_grid.coords
    f = ScalarField(square_grid, np.sin(3.0 * x[0]) * x[1])
    g = ScalarField(square_grid, np.cos(2.0 * x[1]) + x[0] ** 2)
    lhs = mollify(f * 1.5 + g * -0.25, 0.1).values
    rhs = 1.5 * mollify(f, 0.1).values - 0.25 * mollify(g, 0.1).values
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_mollify_commutes_with_grid_translation(square_grid):
    x = square_grid.coords
    f = ScalarField(square_grid, np.exp(-20.0 * ((x[0] - 0.4) ** 2 + (x[1] - 0.5) ** 2)))
    shifted = ScalarField(square_grid, np.roll(f.values, 3, axis=0))
    lhs = np.roll(mollify(f, 0.1).values, 3, axis=0)
    rhs = mollify(shifted, 0.1).values
    # away from the wrapped rows the two agree
    assert np.allclose(lhs[10:-10, :], rhs[10:-10, :], atol=1e-12)


def test_mollify_rejects_length_beyond_collar(square_grid):
    f = ScalarField.zeros(square_grid)
    with pytest.raises(FieldError):
        mollify(f, square_grid.pad * 1.5)


def test_mollify_below_grid_spacing_is_identity(square_grid):
    x = square_grid.coords
    f = ScalarField(square_grid, np.sin(x[0] + x[1]))
    assert np.array_equal(mollify(f, 0.5 * square_grid.h).values, f.values)


def test_mollification_estimates_have_finite_constants(square_grid):
    x = square_grid.coords
    f = ScalarField(square_grid, np.exp(-8.0 * ((x[0] - 0.5) ** 2 + (x[1] - 0.5) ** 2)))
    report = mollification_report(f, 0.15, square_grid.interior)
    assert np.isfinite(report['second_order_ratio'])
    assert report['second_order_ratio'] < 1.0
    assert report['first_order_ratio'] < 1.0
    assert report['monotonicity_ratio'] <= 1.0 + 1e-12
    value, bound = commutator_norm(f, f, 0.15, square_grid.interior)
    assert value <= 2.0 * bound


def test_symmat_identity_and_trace(square_grid):
    scale = np.linspace(0.0, 1.0, square_grid.size).reshape(square_grid.shape)
    eye = SymMatrixField.identity(square_grid, scale)
    assert np.allclose(eye.trace().values, 2.0 * scale)
    assert np.allclose(eye.values[1], 0.0)


def test_sup_and_ck_norms(square_grid):
    x = square_grid.coords
    f = ScalarField(square_grid, 2.0 * x[0])
    top = float(np.max(x[0]))
    assert sup_norm(f) == pytest.approx(2.0 * top)
    assert ck_norm(f, 1) == pytest.approx(2.0 * top + 2.0)
    assert sup_norm(f, np.zeros(square_grid.shape, dtype=bool)) == 0.0


def test_holder_seminorm_of_linear_function(square_grid):
    x = square_grid.coords
    f = ScalarField(square_grid, 2.0 * x[0] - 0.5 * x[1])
    assert holder_seminorm(f, 0, 1.0) == pytest.approx(2.0, rel=1e-9)
    assert holder_seminorm(f, 1, 0.5) == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(FieldError):
        holder_seminorm(f, 0, 1.5)


def test_smooth_indicator_is_exact_away_from_the_edge(square_grid):
    x = square_grid.coords
    region = (x[0] > 0.3) & (x[0] < 0.7)
    eta = smooth_indicator(square_grid, region, 0.1)
    assert np.all(eta[(x[0] > 0.41) & (x[0] < 0.59)] == 1.0)
    assert np.all(eta[(x[0] < 0.19) | (x[0] > 0.81)] == 0.0)
    assert np.all((eta >= 0.0) & (eta <= 1.0))


def test_reflect_extension_keeps_boundary_value(disc_grid):
    values = np.where(disc_grid.interior, 1.0 - np.sum(disc_grid.coords ** 2, axis=0), 0.0)
    extended = disc_grid.reflect_extension(values, lambda pts: np.zeros(pts.shape[1:]))
    assert np.array_equal(extended[disc_grid.interior], (values * disc_grid.collar_cutoff)[disc_grid.interior])
    outside = disc_grid.mask == EXTERIOR
    assert np.allclose(extended[outside], 0.0)
