"""Direct maximization of the profit functional: projection and solve."""

import numpy as np
import pytest

from screenopt import (
    DivergenceError,
    ModelParams,
    ScalarField,
    SolverConfig,
    build_ansatz_field,
    evaluate_phi,
    exclusion_level,
    phi_gradient,
    project_feasible,
    solve,
)
from screenopt.direct_solver import FeasibleSetProjector, constraint_matrix


@pytest.fixture(scope="module")
def solved_32():
    params = ModelParams(a=1.0, n=32)
    field, report = solve(params, SolverConfig(max_iters=2000))
    return params, field, report


def test_projection_fixes_feasible_points():
    params = ModelParams(a=1.0, n=24)
    x1, x2 = params.meshgrid()
    u = ScalarField(params, (x1 - 1.0) ** 2 + (x2 - 1.0) ** 2 + (x1 - 1.0) * (x2 - 1.0))
    out = project_feasible(u, SolverConfig(projection_iters=60))
    assert np.abs(out.values - u.values).max() <= 1e-12


def test_projection_clips_negative_constant():
    params = ModelParams(a=1.0, n=24)
    u = ScalarField(params, np.full((24, 24), -1.0))
    out = project_feasible(u, SolverConfig(projection_iters=60))
    assert np.abs(out.values).max() <= 1e-10


def test_projection_restores_monotonicity():
    params = ModelParams(a=1.0, n=24)
    x1, x2 = params.meshgrid()
    u = ScalarField(params, 1.0 - 0.3 * x1 + 0.1 * x2)
    out = project_feasible(u, SolverConfig(projection_iters=200))
    fwd1 = np.diff(out.values, axis=0)
    fwd2 = np.diff(out.values, axis=1)
    assert fwd1.min() >= -1e-8
    assert fwd2.min() >= -1e-8


def test_constraint_matrix_counts():
    params = ModelParams(a=1.0, n=20)
    G = constraint_matrix(params, stencil_width=1)
    n = 20
    expected = n * n + 2 * n * (n - 1) + 2 * n * (n - 2) + 2 * (n - 2) * (n - 2)
    assert G.shape == (expected, n * n)
    # feasible field has nonnegative slacks
    x1, x2 = params.meshgrid()
    u = ((x1 - 1.0) ** 2 + (x2 - 1.0) ** 2).ravel()
    assert (G @ u).min() >= -1e-12


def test_phi_gradient_matches_quadrature():
    # directional derivative of phi against a finite difference
    params = ModelParams(a=1.0, n=24)
    rng = np.random.default_rng(3)
    x1, x2 = params.meshgrid()
    u0 = ScalarField(params, 0.2 * ((x1 - 1.0) ** 2 + (x2 - 1.0) ** 2))
    dv = ScalarField(params, rng.standard_normal((24, 24)) * 0.01)
    g = phi_gradient(u0)
    lhs = float((np.asarray(g.values) * dv.values).sum())
    eps = 1e-6
    up = ScalarField(params, u0.values + eps * dv.values)
    dn = ScalarField(params, u0.values - eps * dv.values)
    rhs = (evaluate_phi(up) - evaluate_phi(dn)) / (2.0 * eps)
    assert abs(lhs - rhs) <= 1e-7 * max(1.0, abs(rhs))


def test_solution_zero_on_exclusion_region(solved_32):
    params, field, _ = solved_32
    x1, x2 = params.meshgrid()
    below = x1 + x2 < exclusion_level(1.0) - 0.05
    assert np.abs(field.values[below]).max() <= 1e-3


def test_solution_symmetric(solved_32):
    _, field, _ = solved_32
    assert np.abs(field.values - field.values.T).max() <= 1e-6


def test_solution_feasible(solved_32):
    params, field, report = solved_32
    proj = FeasibleSetProjector(params, 1)
    assert proj.max_violation(field.values.ravel()) <= 1e-6
    assert report.primal_residual <= 1e-6


def test_solution_beats_ansatz(solved_32):
    params, field, report = solved_32
    ansatz, _ = build_ansatz_field(params)
    phi_ansatz = evaluate_phi(ansatz)
    assert report.phi > phi_ansatz
    assert abs(evaluate_phi(field) - report.phi) <= 1e-9


def test_phi_grid_refinement_consistency(solved_32):
    # |phi_n - phi_2n| decreases with n on a short ladder
    _, _, rep32 = solved_32
    phi16 = solve(ModelParams(a=1.0, n=16), SolverConfig(max_iters=1500))[1].phi
    phi64 = solve(ModelParams(a=1.0, n=64), SolverConfig(max_iters=1500))[1].phi
    assert abs(rep32.phi - phi64) < abs(phi16 - rep32.phi)


def test_divergence_guard_trips_on_bad_step():
    params = ModelParams(a=1.0, n=24)
    with pytest.raises(DivergenceError):
        solve(params, SolverConfig(max_iters=400, step_size=50.0))
