"""Grid calculus: gradients, Hessians, quadrature, CSV round trips."""

import numpy as np
import pytest

from screenopt import (
    ModelParams,
    ScalarField,
    ValidationError,
    gradient,
    hessian,
    integrate,
)
from screenopt.grid_field import (
    min_second_difference,
    quadrature_weights,
    read_field_csv,
    second_difference,
    write_field_csv,
)


@pytest.fixture
def params():
    return ModelParams(a=1.0, n=48)


def test_gradient_exact_on_affine(params):
    x1, x2 = params.meshgrid()
    u = ScalarField(params, 2.0 * x1 - 0.5 * x2 + 3.0)
    du = gradient(u)
    assert np.allclose(du.dx1, 2.0, atol=1e-12)
    assert np.allclose(du.dx2, -0.5, atol=1e-12)


def test_gradient_second_order_on_smooth(params):
    x1, x2 = params.meshgrid()
    u = ScalarField(params, np.sin(x1) * np.cos(x2))
    du = gradient(u)
    err = np.abs(du.dx1 - np.cos(x1) * np.cos(x2)).max()
    # one-sided second-order stencils at the edges keep O(h^2)
    assert err <= 5.0 * params.h**2


def test_hessian_exact_on_quadratic(params):
    x1, x2 = params.meshgrid()
    u = ScalarField(params, 0.5 * x1**2 + 0.25 * x2**2 + 0.1 * x1 * x2)
    hess = hessian(u)
    assert np.allclose(hess.xx, 1.0, atol=1e-10)
    assert np.allclose(hess.yy, 0.5, atol=1e-10)
    interior = np.s_[1:-1, 1:-1]
    assert np.allclose(hess.xy[interior], 0.1, atol=1e-10)


def test_hessian_eigenvalues_ordered(params):
    x1, x2 = params.meshgrid()
    u = ScalarField(params, 0.75 * (x1**2 + x2**2))
    lo, hi = hessian(u).eigenvalues()
    assert np.all(lo <= hi + 1e-15)
    assert np.allclose(lo, 1.5, atol=1e-9)
    assert np.allclose(hi, 1.5, atol=1e-9)


def test_quadrature_weights_sum_to_area(params):
    w = quadrature_weights(params)
    assert abs(w.sum() - 1.0) <= 1e-12


def test_integrate_linear_exact(params):
    x1, x2 = params.meshgrid()
    u = ScalarField(params, 4.0 * x1 + x2)
    a = params.a
    exact = 4.0 * (a + 0.5) + (a + 0.5)
    assert abs(integrate(u) - exact) <= 1e-12


def test_second_difference_sign_detects_concavity(params):
    x1, x2 = params.meshgrid()
    convex = ScalarField(params, x1**2 + x2**2)
    concave = ScalarField(params, -(x1**2) - x2**2)
    assert min_second_difference(convex) >= -1e-12
    assert min_second_difference(concave) < 0.0


def test_second_difference_directions(params):
    x1, x2 = params.meshgrid()
    vals = x1 * x2  # pure saddle: diagonal directions see opposite curvature
    d_plus = second_difference(vals, (1, 1))
    d_minus = second_difference(vals, (1, -1))
    h2 = (np.sqrt(2) * params.h) ** 2
    assert np.allclose(d_plus / h2, 1.0, atol=1e-9)
    assert np.allclose(d_minus / h2, -1.0, atol=1e-9)


def test_field_shape_validation(params):
    with pytest.raises(ValidationError):
        ScalarField(params, np.zeros((3, 3)))
    with pytest.raises(ValidationError):
        ScalarField(params, np.full((params.n, params.n), np.inf))


def test_masked_field_allows_nan(params):
    vals = np.zeros((params.n, params.n))
    vals[0, 0] = np.nan
    field = ScalarField.masked(params, vals)
    assert np.isnan(field.values[0, 0])


def test_field_csv_round_trip(tmp_path, params):
    x1, x2 = params.meshgrid()
    u = ScalarField(params, np.sin(3 * x1) + x2**2)
    path = tmp_path / "u.csv"
    write_field_csv(u, path)
    back = read_field_csv(path)
    assert back.params.n == params.n
    assert abs(back.params.a - params.a) <= 1e-12
    assert np.allclose(back.values, u.values, atol=1e-14, rtol=0.0)
