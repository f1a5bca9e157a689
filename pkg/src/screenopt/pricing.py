"""Price menu and product intensity from a solved utility field.

The menu charges v(y) for product y, with v the convex conjugate of the
indirect utility:

    v(y) = max over types x of [ x . y - u(x) ],

computed here as an exact discrete Legendre transform over the grid.  The
maximization is separable, so two one-dimensional max passes reproduce the
full two-dimensional max exactly (max is associative; no fast-transform
approximation is involved).  The product bought by type x is y = Du(x), and
the intensity histogram is the pushforward of the uniform type measure under
that map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .grid_field import ScalarField, gradient, quadrature_weights

_DEFAULT_EXCLUDED_TOL = 1e-9


@dataclass(frozen=True)
class PriceMenu:
    y1: np.ndarray
    y2: np.ndarray
    values: np.ndarray
    y_max: float

    def __post_init__(self) -> None:
        if self.values.shape != (self.y1.size, self.y2.size):
            raise ValidationError("menu value grid does not match its axes")
        if abs(self.values[0, 0]) > 1e-12:
            raise ValidationError("outside option must be free: v(0,0) = 0")
        for arr in (self.y1, self.y2, self.values):
            arr.setflags(write=False)

    def min_second_difference(self) -> float:
        """Most negative axis/diagonal second difference of the sampled menu."""
        v = self.values
        worst = 0.0
        worst = min(worst, float((v[2:, :] + v[:-2, :] - 2 * v[1:-1, :]).min()))
        worst = min(worst, float((v[:, 2:] + v[:, :-2] - 2 * v[:, 1:-1]).min()))
        worst = min(worst, float((v[2:, 2:] + v[:-2, :-2] - 2 * v[1:-1, 1:-1]).min()))
        worst = min(worst, float((v[2:, :-2] + v[:-2, 2:] - 2 * v[1:-1, 1:-1]).min()))
        return worst


@dataclass(frozen=True)
class ProductIntensity:
    edges1: np.ndarray
    edges2: np.ndarray
    mass: np.ndarray

    def __post_init__(self) -> None:
        if self.mass.shape != (self.edges1.size - 1, self.edges2.size - 1):
            raise ValidationError("intensity bins do not match edges")
        for arr in (self.edges1, self.edges2, self.mass):
            arr.setflags(write=False)

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())


def price_menu(u: ScalarField, y_max: float | None = None, m_bins: int | None = None) -> PriceMenu:
    """Exact grid Legendre transform v(y) = max_x (x . y - u(x)).

    The joint 2-D max separates into two nested 1-D max reductions, which
    equal the direct max exactly (max is associative and comparisons are
    exact); no fast-transform approximation is involved.
    """
    params = u.params
    if y_max is None:
        y_max = params.a + 1
    if m_bins is None:
        m_bins = params.n
    if y_max <= 0 or m_bins < 2:
        raise ValidationError("need y_max > 0 and m_bins >= 2")
    u_min = float(u.values.min())
    if u_min < -1e-9:
        raise ValidationError(f"utility field is negative (min {u_min:.3e})")
    if u_min > 1e-3:
        raise ValidationError(
            f"no excluded type: min u = {u_min:.3e}; participation requires min u = 0"
        )
    # Participation normalization: the outside option binds for the excluded
    # types, so the model's u has min exactly 0.  Subtracting the (solver
    # round-off sized) minimum restores that before conjugating, which pins
    # v(0,0) = max_x(-u(x)) = 0 exactly.
    u_values = u.values - u_min
    y = np.linspace(0.0, y_max, m_bins)
    x = params.axis
    # inner[i, l] = max_j (x_j y_l - u[i, j]); values[k, l] = max_i (x_i y_k + inner[i, l])
    xy = x[:, None] * y[None, :]
    inner = (xy[None, :, :] - u_values[:, :, None]).max(axis=1)
    values = (xy[:, :, None] + inner[:, None, :]).max(axis=0)
    return PriceMenu(y1=y.copy(), y2=y.copy(), values=values, y_max=float(y_max))


def conjugate_on_square(menu: PriceMenu, params) -> ScalarField:
    """Conjugate of the menu restricted back to the type square."""
    x = params.axis
    # inner[k, j] = max_l (y_l x_j - v[k, l]); out[i, j] = max_k (y_k x_i + inner[k, j])
    yx = menu.y2[:, None] * x[None, :]
    inner = (yx[None, :, :] - menu.values[:, :, None]).max(axis=1)
    yx1 = menu.y1[:, None] * x[None, :]
    values = (yx1[:, :, None] + inner[:, None, :]).max(axis=0)
    return ScalarField(params, values)


def double_conjugate_gap(u: ScalarField, menu: PriceMenu | None = None) -> float:
    """sup |u - (conjugate of the menu)| over the grid.

    The double conjugate is the convex envelope at grid resolution; for a
    discretely convex u the gap shrinks with both grid spacings.
    """
    if menu is None:
        menu = price_menu(u)
    back = conjugate_on_square(menu, u.params)
    return float(np.abs(u.values - back.values).max())


def product_intensity(
    u: ScalarField, bins: int = 64, excluded_tol: float = _DEFAULT_EXCLUDED_TOL
) -> ProductIntensity:
    """Pushforward of the uniform type measure under x -> Du(x), binned.

    Nodes with u <= excluded_tol take the outside option y = (0, 0) and land
    in the origin bin.  Gradients are clipped into [0, a+1] per coordinate so
    boundary round-off cannot leak mass outside the histogram.
    """
    if bins < 2:
        raise ValidationError("need at least 2 bins per axis")
    params = u.params
    y_max = params.a + 1
    du = gradient(u)
    y1 = du.dx1.copy()
    y2 = du.dx2.copy()
    excluded = u.values <= excluded_tol
    y1[excluded] = 0.0
    y2[excluded] = 0.0
    y1 = np.clip(y1, 0.0, y_max)
    y2 = np.clip(y2, 0.0, y_max)
    w = quadrature_weights(params)
    mass, e1, e2 = np.histogram2d(
        y1.ravel(),
        y2.ravel(),
        bins=bins,
        range=[[0.0, y_max], [0.0, y_max]],
        weights=w.ravel(),
    )
    return ProductIntensity(edges1=e1, edges2=e2, mass=mass)


def write_menu_csv(menu: PriceMenu, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("y1,y2,value\n")
        for k, ya in enumerate(menu.y1):
            for ell, yb in enumerate(menu.y2):
                fh.write(f"{ya:.17g},{yb:.17g},{menu.values[k, ell]:.17g}\n")


def write_intensity_csv(hist: ProductIntensity, path) -> None:
    c1 = 0.5 * (hist.edges1[:-1] + hist.edges1[1:])
    c2 = 0.5 * (hist.edges2[:-1] + hist.edges2[1:])
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("y1,y2,mass\n")
        for k, ya in enumerate(c1):
            for ell, yb in enumerate(c2):
                fh.write(f"{ya:.17g},{yb:.17g},{hist.mass[k, ell]:.17g}\n")
