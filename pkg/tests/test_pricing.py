"""Convex-conjugate price menu and product intensity."""

import numpy as np
import pytest

from screenopt import (
    ModelParams,
    ScalarField,
    ValidationError,
    conjugate_on_square,
    double_conjugate_gap,
    price_menu,
    product_intensity,
)
from screenopt.pricing import write_intensity_csv, write_menu_csv


@pytest.fixture
def params():
    return ModelParams(a=1.0, n=48)


def _quadratic_field(params, c=0.5):
    # u = c|x|^2/... convex, zero at the corner (a, a) after shifting
    x1, x2 = params.meshgrid()
    vals = c * ((x1 - params.a) ** 2 + (x2 - params.a) ** 2)
    return ScalarField(params, vals)


def test_menu_zero_at_origin(params):
    menu = price_menu(_quadratic_field(params))
    assert menu.values[0, 0] == 0.0


def test_menu_monotone(params):
    menu = price_menu(_quadratic_field(params))
    assert np.diff(menu.values, axis=0).min() >= -1e-12
    assert np.diff(menu.values, axis=1).min() >= -1e-12


def test_menu_normalizes_solver_roundoff(params):
    # a field sitting 1e-10 above zero everywhere still yields v(0,0) = 0
    base = _quadratic_field(params)
    field = ScalarField(params, base.values + 1e-10)
    menu = price_menu(field)
    assert menu.values[0, 0] == 0.0


def test_menu_rejects_nonparticipating_field(params):
    field = ScalarField(params, _quadratic_field(params).values + 1.0)
    with pytest.raises(ValidationError):
        price_menu(field)


def test_conjugate_inequality_and_gap(params):
    # Fenchel: u(x) + v(y) >= x . y, with equality attained by the argmax;
    # the double conjugate of a convex grid field nearly recovers it
    field = _quadratic_field(params)
    menu = price_menu(field)
    x1, x2 = params.meshgrid()
    for yi in (3, 17, 40):
        y1 = menu.y1[yi]
        y2 = menu.y2[yi]
        lhs = field.values + menu.values[yi, yi]
        assert (lhs - (x1 * y1 + x2 * y2)).min() >= -1e-9
    gap = double_conjugate_gap(field, menu)
    assert 0.0 <= gap <= 5e-3


def test_double_conjugate_gap_detects_nonconvexity(params):
    x1, x2 = params.meshgrid()
    bump = 0.15 * np.exp(-60.0 * ((x1 - 1.5) ** 2 + (x2 - 1.5) ** 2))
    vals = 0.5 * ((x1 - 1) ** 2 + (x2 - 1) ** 2) + bump
    vals -= vals.min()
    field = ScalarField(params, vals)
    menu = price_menu(field)
    # convexification clips the bump: gap must register it
    assert double_conjugate_gap(field, menu) > 5e-2


def test_conjugate_on_square_matches_menu(params):
    field = _quadratic_field(params)
    menu = price_menu(field)
    again = conjugate_on_square(menu, params)
    # v** <= u with equality for convex u (up to grid transform error)
    assert np.all(again.values <= field.values + 1e-9)


def test_intensity_mass_and_support(params):
    field = _quadratic_field(params)
    hist = product_intensity(field, bins=32)
    assert abs(hist.total_mass - 1.0) <= 1e-9
    assert hist.mass.min() >= 0.0
    # gradient of u covers [0, 1]^2 here, well inside [0, a+1]^2
    assert hist.edges1[0] == 0.0
    assert hist.edges1[-1] >= 1.0


def test_intensity_excluded_atom(params):
    # flat-at-zero region maps to the outside option bin
    x1, x2 = params.meshgrid()
    vals = np.maximum(x1 + x2 - 2.5, 0.0) ** 2
    field = ScalarField(params, vals)
    hist = product_intensity(field, bins=16)
    flat_fraction = float((vals <= 1e-9).mean())
    assert hist.mass[0, 0] >= 0.8 * flat_fraction


def test_menu_and_intensity_csv(tmp_path, params):
    field = _quadratic_field(params)
    menu = price_menu(field)
    hist = product_intensity(field, bins=16)
    write_menu_csv(menu, tmp_path / "menu.csv")
    write_intensity_csv(hist, tmp_path / "intensity.csv")
    assert (tmp_path / "menu.csv").read_text().startswith("y1,y2,value")
    assert (tmp_path / "intensity.csv").exists()


def test_zero_field_menu_is_corner_supported(params):
    # v(y) = max_x x . y = (a+1)(y1+y2) when u = 0
    field = ScalarField(params, np.zeros((params.n, params.n)))
    menu = price_menu(field)
    expected = (params.a + 1.0) * (menu.y1[:, None] + menu.y2[None, :])
    assert np.abs(menu.values - expected).max() <= 1e-12
