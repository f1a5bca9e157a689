"""Grid functions on the type square and their discrete operators.

Fields live on the uniform tensor grid of ``ModelParams``: node (i, j) sits
at x = (a + i*h, a + j*h) with h = 1/(n-1).  First derivatives use centered
differences in the interior and second-order one-sided stencils on the
boundary rows; the diagonal Hessian entries use the standard 3-point second
difference (4-point one-sided at the boundary); quadrature is the tensor
trapezoid rule, which matches the O(h^2) accuracy of the operators and sums
in a fixed order so results are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError
from .params import ModelParams

# Directions (as integer grid steps) along which discrete convexity is
# enforced: axes and both diagonals, plus knight moves for the wide stencil.
WIDTH1_DIRECTIONS: tuple[tuple[int, int], ...] = ((1, 0), (0, 1), (1, 1), (1, -1))
WIDTH2_DIRECTIONS: tuple[tuple[int, int], ...] = WIDTH1_DIRECTIONS + (
    (2, 1),
    (1, 2),
    (2, -1),
    (1, -2),
)


def _check_values(params: ModelParams, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != (params.n, params.n):
        raise ValidationError(
            f"field shape {values.shape} does not match grid {params.n}x{params.n}"
        )
    if not np.all(np.isfinite(values)):
        raise ValidationError("field contains non-finite values")
    return values


@dataclass(frozen=True)
class ScalarField:
    """A scalar grid function u, values[i, j] = u(a + i*h, a + j*h)."""

    params: ModelParams
    values: np.ndarray

    def __post_init__(self) -> None:
        values = _check_values(self.params, self.values).copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, params: ModelParams, fn) -> "ScalarField":
        x1, x2 = params.meshgrid()
        return cls(params, np.asarray(fn(x1, x2), dtype=float))

    @classmethod
    def zeros(cls, params: ModelParams) -> "ScalarField":
        return cls(params, np.zeros((params.n, params.n)))

    @classmethod
    def masked(cls, params: ModelParams, values: np.ndarray) -> "ScalarField":
        """Field restricted to a subdomain; NaN marks nodes outside it."""
        values = np.asarray(values, dtype=float)
        if values.shape != (params.n, params.n):
            raise ValidationError(
                f"field shape {values.shape} does not match grid {params.n}x{params.n}"
            )
        obj = cls.__new__(cls)
        vals = values.copy()
        vals.setflags(write=False)
        object.__setattr__(obj, "params", params)
        object.__setattr__(obj, "values", vals)
        return obj

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.params, values)


@dataclass(frozen=True)
class VectorField:
    """Componentwise gradient (du/dx1, du/dx2) on the same grid."""

    params: ModelParams
    dx1: np.ndarray
    dx2: np.ndarray

    def __post_init__(self) -> None:
        for name in ("dx1", "dx2"):
            arr = _check_values(self.params, getattr(self, name)).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class HessianField:
    """Per-node symmetric 2x2 second-derivative matrices [[xx, xy], [xy, yy]]."""

    params: ModelParams
    xx: np.ndarray
    xy: np.ndarray
    yy: np.ndarray

    def eigenvalues(self) -> tuple[np.ndarray, np.ndarray]:
        """Closed-form eigenvalues (smaller, larger) of each 2x2 matrix."""
        mean = 0.5 * (self.xx + self.yy)
        radius = np.sqrt(0.25 * (self.xx - self.yy) ** 2 + self.xy**2)
        return mean - radius, mean + radius

    def trace(self) -> np.ndarray:
        return self.xx + self.yy


def gradient(u: ScalarField) -> VectorField:
    """Discrete gradient: centered interior, second-order one-sided edges."""
    if u.params.n < 3:
        raise ValidationError("gradient needs n >= 3")
    h = u.params.h
    d1 = np.gradient(u.values, h, axis=0, edge_order=2)
    d2 = np.gradient(u.values, h, axis=1, edge_order=2)
    return VectorField(u.params, d1, d2)


def _second_axis(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """3-point second difference along an axis, 4-point one-sided at the ends."""
    v = np.moveaxis(values, axis, 0)
    out = np.empty_like(v)
    out[1:-1] = v[2:] - 2.0 * v[1:-1] + v[:-2]
    out[0] = 2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]
    out[-1] = 2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]
    out /= h * h
    return np.moveaxis(out, 0, axis)


def hessian(u: ScalarField) -> HessianField:
    """Discrete Hessian; the mixed entry composes the two first-derivative stencils."""
    if u.params.n < 5:
        raise ValidationError("hessian needs n >= 5")
    h = u.params.h
    xx = _second_axis(u.values, h, axis=0)
    yy = _second_axis(u.values, h, axis=1)
    xy = np.gradient(
        np.gradient(u.values, h, axis=0, edge_order=2), h, axis=1, edge_order=2
    )
    return HessianField(u.params, xx, xy, yy)


def quadrature_weights(params: ModelParams) -> np.ndarray:
    """Tensor trapezoid weights; sum equals the unit area of the square."""
    w1 = np.full(params.n, params.h)
    w1[0] = w1[-1] = 0.5 * params.h
    return np.outer(w1, w1)


def integrate(f: ScalarField) -> float:
    """Trapezoid quadrature of f over the square (uniform unit density)."""
    h = f.params.h
    return float(np.trapezoid(np.trapezoid(f.values, dx=h, axis=1), dx=h, axis=0))


def second_difference(values: np.ndarray, direction: tuple[int, int]) -> np.ndarray:
    """u(x+d) + u(x-d) - 2 u(x) for integer grid step d, at all admissible nodes.

    Returns an array of shape (n - 2|p|, n - 2|q|) whose [0, 0] entry is the
    node (|p|, |q|).
    """
    p, q = direction
    if p < 0 or (p == 0 and q < 0):
        p, q = -p, -q  # second differences are symmetric under d -> -d
    n = values.shape[0]
    pa, qa = p, abs(q)
    if pa == 0 and qa == 0:
        raise ValidationError("direction must be nonzero")
    center = values[pa : n - pa, qa : n - qa]
    if q >= 0:
        plus = values[2 * pa :, 2 * qa :]
        minus = values[: n - 2 * pa, : n - 2 * qa]
    else:
        plus = values[2 * pa :, : n - 2 * qa]
        minus = values[: n - 2 * pa, 2 * qa :]
    return plus + minus - 2.0 * center


def directions_for_width(stencil_width: int) -> tuple[tuple[int, int], ...]:
    if stencil_width == 1:
        return WIDTH1_DIRECTIONS
    if stencil_width == 2:
        return WIDTH2_DIRECTIONS
    raise ValidationError(f"stencil_width must be 1 or 2, got {stencil_width}")


def directional_second_differences(
    u: ScalarField, stencil_width: int = 1
) -> dict[tuple[int, int], np.ndarray]:
    """Second differences along each convexity direction.

    All entries nonnegative is the discrete convexity surrogate used
    throughout; it enforces convexity only along finitely many directions.
    """
    return {
        d: second_difference(u.values, d) for d in directions_for_width(stencil_width)
    }


def min_second_difference(u: ScalarField, stencil_width: int = 1) -> float:
    """Most negative directional second difference (>= 0 means discretely convex)."""
    return min(
        float(arr.min()) for arr in directional_second_differences(u, stencil_width).values()
    )


def diff_matrix_1d(n: int, h: float) -> sp.csr_matrix:
    """1-D differentiation matrix matching ``gradient`` exactly.

    Centered interior rows, second-order one-sided first and last rows.
    """
    mat = sp.lil_matrix((n, n))
    for i in range(1, n - 1):
        mat[i, i - 1] = -0.5 / h
        mat[i, i + 1] = 0.5 / h
    mat[0, 0], mat[0, 1], mat[0, 2] = -1.5 / h, 2.0 / h, -0.5 / h
    mat[n - 1, n - 1], mat[n - 1, n - 2], mat[n - 1, n - 3] = 1.5 / h, -2.0 / h, 0.5 / h
    return mat.tocsr()


def gradient_matrices(params: ModelParams) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Sparse operators G1, G2 acting on row-major flattened fields."""
    d = diff_matrix_1d(params.n, params.h)
    eye = sp.identity(params.n, format="csr")
    g1 = sp.kron(d, eye, format="csr")
    g2 = sp.kron(eye, d, format="csr")
    return g1, g2


FIELD_CSV_HEADER = "x1,x2,value"


def write_field_csv(field: ScalarField, path) -> None:
    """Write `x1,x2,value` rows, row-major in (i, j), 17 significant digits."""
    x1, x2 = field.params.meshgrid()
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(FIELD_CSV_HEADER + "\n")
        for xa, xb, v in zip(x1.ravel(), x2.ravel(), field.values.ravel()):
            fh.write(f"{xa:.17g},{xb:.17g},{v:.17g}\n")


def read_field_csv(path, tol: float = 1e-8) -> ScalarField:
    """Reconstruct a ScalarField written by :func:`write_field_csv`."""
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    if data.ndim != 2 or data.shape[1] != 3:
        raise ValidationError(f"{path}: expected three columns x1,x2,value")
    m = data.shape[0]
    n = int(round(np.sqrt(m)))
    if n * n != m:
        raise ValidationError(f"{path}: {m} rows is not a square grid")
    x1 = data[:, 0].reshape(n, n)
    x2 = data[:, 1].reshape(n, n)
    a = float(x1[0, 0])
    params = ModelParams(a=a, n=n, tol=tol)
    g1, g2 = params.meshgrid()
    if not (np.allclose(x1, g1, atol=1e-10) and np.allclose(x2, g2, atol=1e-10)):
        raise ValidationError(f"{path}: coordinates are not the expected uniform grid")
    return ScalarField(params, data[:, 2].reshape(n, n))
