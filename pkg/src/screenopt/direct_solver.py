"""Direct maximization of the discrete profit functional.

The monopolist's profit of an indirect-utility field u is

    Phi[u] = integral of [ x . Du - u - |Du|^2 / 2 ]

over the type square, a concave quadratic in the nodal values once Du is the
discrete gradient and the integral the trapezoid rule.  It is maximized over
the polyhedral feasible set

    { u >= 0 }  with  { forward differences >= 0 along both axes }
                and   { second differences >= 0 along the stencil directions }

by projected gradient ascent with Nesterov-style acceleration.  The Euclidean
projection onto the intersection runs cyclic Dykstra passes over the
half-space families; for half-spaces Dykstra's increments reduce to one
nonnegative multiplier per constraint (Hildreth's method), which lets each
family update run vectorized over groups of constraints with disjoint
stencils.  Multipliers persist between ascent iterations as a warm start.

Cyclic projection passes move information one grid cell per pass, so on fine
grids the ascent stalls a small distance from the true maximizer.  A final
refinement removes that bias exactly: the Lagrange dual of the quadratic
program is a bound-constrained smooth minimization in the constraint
multipliers, solved to machine-level KKT residuals with a limited-memory
quasi-Newton method after factorizing the (grounded) quadratic form once.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import RegularGridInterpolator
from scipy.optimize import minimize

from .errors import DivergenceError, NonConvergenceError, ValidationError
from .grid_field import (
    ScalarField,
    VectorField,
    directions_for_width,
    gradient,
    gradient_matrices,
    integrate,
    quadrature_weights,
)
from .params import ModelParams


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 2000
    step_size: float | str = "auto"
    kkt_tol: float = 1e-8
    projection_iters: int = 40
    stencil_width: int = 1

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValidationError("max_iters must be >= 1")
        if self.kkt_tol <= 0:
            raise ValidationError("kkt_tol must be positive")
        if isinstance(self.step_size, str):
            if self.step_size != "auto":
                raise ValidationError("step_size must be a positive real or 'auto'")
        elif not self.step_size > 0:
            raise ValidationError("step_size must be a positive real or 'auto'")
        if self.projection_iters < 1:
            raise ValidationError("projection_iters must be >= 1")
        if self.stencil_width not in (1, 2):
            raise ValidationError("stencil_width must be 1 or 2")


@dataclass(frozen=True)
class SolveReport:
    phi: float
    iterations: int
    primal_residual: float
    stationarity_residual: float

    def __post_init__(self) -> None:
        if self.primal_residual < 0:
            raise ValidationError("primal_residual must be >= 0")


def evaluate_phi(u: ScalarField) -> float:
    """Profit functional via the discrete gradient and trapezoid quadrature."""
    x1, x2 = u.params.meshgrid()
    du = gradient(u)
    integrand = (
        x1 * du.dx1 + x2 * du.dx2 - u.values - 0.5 * (du.dx1**2 + du.dx2**2)
    )
    return integrate(u.with_values(integrand))


class _PhiProblem:
    """Flattened quadratic form of the profit functional and its gradient."""

    def __init__(self, params: ModelParams):
        self.params = params
        self.g1, self.g2 = gradient_matrices(params)
        self.g1t = self.g1.T.tocsr()
        self.g2t = self.g2.T.tocsr()
        self.w = quadrature_weights(params).ravel()
        x1, x2 = params.meshgrid()
        self.x1 = x1.ravel()
        self.x2 = x2.ravel()

    def phi(self, u: np.ndarray) -> float:
        d1 = self.g1 @ u
        d2 = self.g2 @ u
        integrand = self.x1 * d1 + self.x2 * d2 - u - 0.5 * (d1 * d1 + d2 * d2)
        return float(self.w @ integrand)

    def grad(self, u: np.ndarray) -> np.ndarray:
        d1 = self.g1 @ u
        d2 = self.g2 @ u
        return (
            self.g1t @ (self.w * (self.x1 - d1))
            + self.g2t @ (self.w * (self.x2 - d2))
            - self.w
        )

    def hessian_matrix(self) -> sp.csr_matrix:
        """Negated Hessian of phi (positive semidefinite), assembled sparse."""
        return (self.g1t @ sp.diags(self.w) @ self.g1) + (
            self.g2t @ sp.diags(self.w) @ self.g2
        )

    def linear_term(self) -> np.ndarray:
        """c in phi(u) = c.u - u.A.u/2 (plus a constant)."""
        return self.grad(np.zeros(self.w.size))

    def lipschitz(self) -> float:
        """Largest eigenvalue of the quadratic form's Hessian by power iteration."""
        quad = self.hessian_matrix()
        rng = np.random.default_rng(0)
        v = rng.standard_normal(quad.shape[0])
        v /= np.linalg.norm(v)
        lam = 0.0
        for _ in range(200):
            av = quad @ v
            lam_new = float(v @ av)
            nrm = np.linalg.norm(av)
            if nrm == 0.0:
                return 1.0
            v = av / nrm
            if abs(lam_new - lam) <= 1e-12 * max(1.0, abs(lam_new)):
                lam = lam_new
                break
            lam = lam_new
        return lam


def phi_gradient(u: ScalarField) -> ScalarField:
    """Nodal gradient of the discrete profit functional.

    Adjoints of the difference operators applied to the quadrature-weighted
    gradient mismatch, minus the quadrature weights from the -u term.
    """
    prob = _PhiProblem(u.params)
    return u.with_values(prob.grad(u.values.ravel()).reshape(u.params.n, u.params.n))


class _NonnegFamily:
    """Half-spaces u_ij >= 0 (disjoint, one vectorized sub-step)."""

    normsq = 1.0

    def __init__(self, n: int):
        self.lam = np.zeros((n, n))

    def reset(self) -> None:
        self.lam[:] = 0.0

    def apply_duals(self, u: np.ndarray) -> None:
        u += self.lam

    def sweep(self, u: np.ndarray) -> None:
        lam_new = np.maximum(0.0, self.lam - u)
        u += lam_new - self.lam
        self.lam = lam_new

    def violation(self, u: np.ndarray) -> float:
        return max(0.0, float(-u.min()))


class _MonotoneFamily:
    """Half-spaces u(x + e) - u(x) >= 0 along one axis, grouped odd/even."""

    normsq = 2.0

    def __init__(self, n: int, axis: int):
        self.axis = axis
        shape = (n - 1, n) if axis == 0 else (n, n - 1)
        self.lam = np.zeros(shape)
        idx = np.arange(n - 1)
        grid = idx[:, None] if axis == 0 else idx[None, :]
        self.masks = [
            ((grid % 2 == g) & np.ones(shape, dtype=bool)) for g in range(2)
        ]

    def _slices(self):
        if self.axis == 0:
            return (slice(1, None), slice(None)), (slice(None, -1), slice(None))
        return (slice(None), slice(1, None)), (slice(None), slice(None, -1))

    def reset(self) -> None:
        self.lam[:] = 0.0

    def apply_duals(self, u: np.ndarray) -> None:
        up, lo = self._slices()
        u[up] += self.lam
        u[lo] -= self.lam

    def sweep(self, u: np.ndarray) -> None:
        up, lo = self._slices()
        for mask in self.masks:
            diff = u[up] - u[lo]
            lam_new = np.maximum(0.0, self.lam - diff / self.normsq)
            delta = np.where(mask, lam_new - self.lam, 0.0)
            u[up] += delta
            u[lo] -= delta
            self.lam = np.where(mask, lam_new, self.lam)

    def violation(self, u: np.ndarray) -> float:
        up, lo = self._slices()
        return max(0.0, float(-(u[up] - u[lo]).min()))


class _SecondDiffFamily:
    """Half-spaces u(x+d) + u(x-d) - 2u(x) >= 0, grouped mod 3 along lines."""

    normsq = 6.0

    def __init__(self, n: int, direction: tuple[int, int]):
        p, q = direction
        if p < 0 or (p == 0 and q < 0):
            p, q = -p, -q
        self.p, self.q = p, q
        qa = abs(q)
        self.center = (slice(p, n - p), slice(qa, n - qa))
        if q >= 0:
            self.plus = (slice(2 * p, None), slice(2 * qa, None))
            self.minus = (slice(None, n - 2 * p), slice(None, n - 2 * qa))
        else:
            self.plus = (slice(2 * p, None), slice(None, n - 2 * qa))
            self.minus = (slice(None, n - 2 * p), slice(2 * qa, None))
        self.lam = np.zeros((n - 2 * p, n - 2 * qa))
        ii = np.arange(p, n - p)[:, None]
        jj = np.arange(qa, n - qa)[None, :]
        dd = p * p + q * q
        group = ((ii * p + jj * q) % (3 * dd)) // dd
        self.masks = [group == g for g in range(3)]

    def reset(self) -> None:
        self.lam[:] = 0.0

    def apply_duals(self, u: np.ndarray) -> None:
        u[self.plus] += self.lam
        u[self.minus] += self.lam
        u[self.center] -= 2.0 * self.lam

    def _values(self, u: np.ndarray) -> np.ndarray:
        return u[self.plus] + u[self.minus] - 2.0 * u[self.center]

    def sweep(self, u: np.ndarray) -> None:
        for mask in self.masks:
            sd = self._values(u)
            lam_new = np.maximum(0.0, self.lam - sd / self.normsq)
            delta = np.where(mask, lam_new - self.lam, 0.0)
            u[self.plus] += delta
            u[self.minus] += delta
            u[self.center] -= 2.0 * delta
            self.lam = np.where(mask, lam_new, self.lam)

    def violation(self, u: np.ndarray) -> float:
        return max(0.0, float(-self._values(u).min()))


class FeasibleSetProjector:
    """Warm-startable Dykstra projection onto the feasible polyhedron."""

    def __init__(self, params: ModelParams, stencil_width: int = 1):
        n = params.n
        self.n = n
        self.families = [
            _NonnegFamily(n),
            _MonotoneFamily(n, axis=0),
            _MonotoneFamily(n, axis=1),
        ]
        self.families += [
            _SecondDiffFamily(n, d) for d in directions_for_width(stencil_width)
        ]

    def reset(self) -> None:
        for fam in self.families:
            fam.reset()

    def max_violation(self, u: np.ndarray) -> float:
        u = u.reshape(self.n, self.n)
        return max(fam.violation(u) for fam in self.families)

    def project(
        self,
        y: np.ndarray,
        tol: float,
        max_passes: int,
        warm: bool = True,
    ) -> tuple[np.ndarray, float, int]:
        """Approximate projection of y (flat or square); returns flat
        (point, violation, passes)."""
        if not warm:
            self.reset()
        u = y.reshape(self.n, self.n).copy()
        for fam in self.families:
            fam.apply_duals(u)
        viol = self.max_violation(u)
        passes = 0
        while viol > tol and passes < max_passes:
            for fam in self.families:
                fam.sweep(u)
            passes += 1
            viol = self.max_violation(u)
        return u.ravel(), viol, passes


def constraint_matrix(params: ModelParams, stencil_width: int = 1) -> sp.csr_matrix:
    """All feasibility half-spaces as rows of G, feasible iff G u >= 0.

    Row order: nonnegativity (n^2), forward differences along axis 0 then
    axis 1, then one block of second differences per stencil direction.
    """
    n = params.n
    idx = np.arange(n * n).reshape(n, n)
    blocks = [sp.identity(n * n, format="csr")]
    for axis in (0, 1):
        up = idx[1:, :] if axis == 0 else idx[:, 1:]
        lo = idx[:-1, :] if axis == 0 else idx[:, :-1]
        m = up.size
        rows = np.repeat(np.arange(m), 2)
        cols = np.stack([up.ravel(), lo.ravel()], axis=1).ravel()
        vals = np.tile([1.0, -1.0], m)
        blocks.append(sp.csr_matrix((vals, (rows, cols)), shape=(m, n * n)))
    for p, q in directions_for_width(stencil_width):
        qa = abs(q)
        center = idx[p : n - p, qa : n - qa]
        if q >= 0:
            plus = idx[2 * p :, 2 * qa :][: center.shape[0], : center.shape[1]]
            minus = idx[: n - 2 * p, : n - 2 * qa]
        else:
            plus = idx[2 * p :, : n - 2 * qa]
            minus = idx[: n - 2 * p, 2 * qa :]
        m = center.size
        rows = np.repeat(np.arange(m), 3)
        cols = np.stack(
            [plus.ravel(), minus.ravel(), center.ravel()], axis=1
        ).ravel()
        vals = np.tile([1.0, 1.0, -2.0], m)
        blocks.append(sp.csr_matrix((vals, (rows, cols)), shape=(m, n * n)))
    return sp.vstack(blocks, format="csr")


def _family_layout(
    n: int, stencil_width: int
) -> list[tuple[int, int, float, float, float, float, int]]:
    """Geometry of each constraint family's multiplier block.

    Returns (rows, cols, offset1, offset2, half1, half2, scale) per family in
    constraint_matrix row order.  A multiplier block is a 2-D grid over the
    unit square: entry (i, j) sits at ((offset1 + i + half1) h, ...) with
    h = 1/(n-1).  scale is the power of h carried by that family's
    multipliers (see _prolong_multipliers).
    """
    layout = [(n, n, 0.0, 0.0, 0.0, 0.0, 2)]
    layout += [(n - 1, n, 0.0, 0.0, 0.5, 0.0, 1), (n, n - 1, 0.0, 0.0, 0.0, 0.5, 1)]
    for p, q in directions_for_width(stencil_width):
        qa = abs(q)
        layout.append((n - 2 * p, n - 2 * qa, float(p), float(qa), 0.0, 0.0, 0))
    return layout


def _prolong_multipliers(
    lam: np.ndarray, n_coarse: int, n_fine: int, stencil_width: int
) -> np.ndarray:
    """Transfer dual multipliers between grids, family by family.

    At the continuum level each constraint family has a multiplier measure
    with a smooth density on its active set; the discrete multipliers sample
    that density times a mesh factor fixed by the stationarity balance.  The
    gradient of the objective at a node is O(h^2) (quadrature weight), and a
    family's contribution there is the k-th difference of its multiplier
    block, so nodewise multipliers scale as h^2 (nonnegativity, k = 0),
    first differences as h (k = 1), and second differences as h^0 (k = 2).
    Bilinear interpolation of each block in unit-square coordinates times
    (h_fine/h_coarse)^scale therefore lands close to the fine-grid
    multipliers; clipping at zero keeps the result dual feasible.
    """
    ratio = (n_coarse - 1) / (n_fine - 1)
    out = []
    pos = 0
    fine_layout = _family_layout(n_fine, stencil_width)
    for (rc, cc, o1, o2, h1, h2, scale), (rf, cf, *_rest) in zip(
        _family_layout(n_coarse, stencil_width), fine_layout
    ):
        block = lam[pos : pos + rc * cc].reshape(rc, cc)
        pos += rc * cc
        coarse1 = (o1 + np.arange(rc) + h1) / (n_coarse - 1)
        coarse2 = (o2 + np.arange(cc) + h2) / (n_coarse - 1)
        fine1 = (o1 + np.arange(rf) + h1) / (n_fine - 1)
        fine2 = (o2 + np.arange(cf) + h2) / (n_fine - 1)
        interp = RegularGridInterpolator(
            (coarse1, coarse2), block, method="linear",
            bounds_error=False, fill_value=None,
        )
        f1, f2 = np.meshgrid(fine1, fine2, indexing="ij")
        vals = interp(np.stack([f1.ravel(), f2.ravel()], axis=1))
        out.append(np.maximum(0.0, vals) * ratio**scale)
    return np.concatenate(out)


def _dual_refine(
    prob: _PhiProblem,
    params: ModelParams,
    stencil_width: int,
    max_iters: int = 20000,
    stall_tol: float = 1e-6,
    check_every: int = 200,
    lam0: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, sp.csr_matrix] | None:
    """Solve the constrained maximization through its Lagrange dual.

    With the feasible set written as {G u >= 0} and phi(u) = c.u - u.A.u/2,
    the dual is the bound-constrained minimization over multipliers lam >= 0
    of g(lam) = (c + G'lam) . A^{-1} (c + G'lam) / 2, whose value and
    gradient (the slacks G u(lam)) cost one sparse triangular solve once A
    is factorized.  A is singular along constants; it is grounded by a unit
    diagonal pin at the corner node of the type square, which always lies
    strictly inside the excluded region (x1 + x2 = 2a < t05), where the
    maximizer vanishes, so the pin does not move the optimum.  The box
    constraint lam >= 0 is handled natively by the bounded limited-memory
    quasi-Newton method.

    The multipliers converge much more slowly than the primal point they
    induce (many are degenerate on flat patches where constraint rows are
    linearly dependent), so iterating to a tight dual gradient wastes most
    of the budget moving lam without moving u(lam).  Every check_every
    iterations the recovered primal is compared with its previous snapshot;
    two consecutive drifts below stall_tol end the minimization early.
    lam0 warm-starts the multipliers (see _prolong_multipliers).  Returns
    (u, lam, G), or None when the factorization or the minimization fails.
    """
    G = constraint_matrix(params, stencil_width).tocsr()
    gt = G.T.tocsr()
    nn = params.n * params.n
    ground = sp.csr_matrix(([1.0], ([0], [0])), shape=(nn, nn))
    c = prob.linear_term()
    try:
        lu = spla.splu((prob.hessian_matrix() + ground).tocsc())
    except RuntimeError:
        return None

    def value_and_grad(lam: np.ndarray) -> tuple[float, np.ndarray]:
        r = c + gt @ lam
        u = lu.solve(r)
        return 0.5 * float(r @ u), G @ u

    drift = {"u": None, "hits": 0, "count": 0}

    def primal_stalled(intermediate_result) -> None:
        drift["count"] += 1
        if drift["count"] % check_every:
            return
        u_now = lu.solve(c + gt @ intermediate_result.x)
        u_prev, drift["u"] = drift["u"], u_now
        if u_prev is not None and float(np.abs(u_now - u_prev).max()) < stall_tol:
            drift["hits"] += 1
            if drift["hits"] >= 2:
                raise StopIteration
        else:
            drift["hits"] = 0

    if lam0 is None:
        x0 = np.zeros(G.shape[0])
    elif lam0.shape != (G.shape[0],):
        return None
    else:
        x0 = np.maximum(0.0, lam0)
    try:
        res = minimize(
            value_and_grad,
            x0,
            jac=True,
            method="L-BFGS-B",
            bounds=[(0.0, None)] * G.shape[0],
            callback=primal_stalled,
            options={
                "maxiter": max_iters,
                "maxfun": int(1.5 * max_iters),
                "ftol": 0.0,
                "gtol": 1e-12,
                "maxcor": 30,
            },
        )
    except (ValueError, FloatingPointError):
        return None
    lam = res.x
    if not np.all(np.isfinite(lam)):
        return None
    u = lu.solve(c + gt @ lam)
    if not np.all(np.isfinite(u)):
        return None
    return u, lam, G


def _dual_refine_cascade(
    prob: _PhiProblem,
    params: ModelParams,
    stencil_width: int,
) -> tuple[np.ndarray, np.ndarray, sp.csr_matrix] | None:
    """Dual refinement with a coarse-to-fine multiplier warm start.

    Cold-started multipliers on a fine grid need tens of thousands of
    quasi-Newton iterations to identify the active set; the same program at
    half the resolution identifies it in a fraction of the time, and the
    multipliers transfer between grids by family-wise interpolation.  Each
    halved level costs roughly a quarter of the next per iteration and
    starts closer, so the cascade is dominated by the final warm-started
    level.  A failed coarse level only forfeits the warm start.
    """
    levels = [params.n]
    while levels[-1] >= 64 and len(levels) < 3:
        levels.append(levels[-1] // 2)
    levels.reverse()
    lam = None
    out = None
    for i, n_level in enumerate(levels):
        final = n_level == params.n
        p_level = params if final else replace(params, n=n_level)
        prob_level = prob if final else _PhiProblem(p_level)
        out = _dual_refine(
            prob_level,
            p_level,
            stencil_width,
            max_iters=20000 if final else 12000,
            lam0=lam,
        )
        if out is None:
            lam = None
            if final:
                return None
            continue
        lam = out[1]
        if not final:
            lam = _prolong_multipliers(lam, n_level, levels[i + 1], stencil_width)
    return out


def project_feasible(u: ScalarField, cfg: SolverConfig) -> ScalarField:
    """Euclidean projection of u onto the feasible set, to tolerance kkt_tol."""
    projector = FeasibleSetProjector(u.params, cfg.stencil_width)
    values, viol, passes = projector.project(
        u.values, tol=cfg.kkt_tol, max_passes=cfg.projection_iters, warm=False
    )
    if viol > cfg.kkt_tol:
        raise NonConvergenceError(
            f"projection violation {viol:.3e} > {cfg.kkt_tol:.3e} "
            f"after {passes} Dykstra passes"
        )
    return u.with_values(values.reshape(u.params.n, u.params.n))


def _symmetrize(values: np.ndarray) -> np.ndarray:
    # The data is invariant under swapping the two type coordinates and the
    # feasible set is convex, so averaging with the transpose never lowers
    # the concave objective and pins the reflection symmetry exactly.
    return 0.5 * (values + values.T)


def solve(
    params: ModelParams,
    cfg: SolverConfig | None = None,
    callback=None,
) -> tuple[ScalarField, SolveReport]:
    """Maximize the profit functional over the feasible set from u = 0.

    Accelerated projected gradient ascent with gradient-mapping restarts,
    followed by an exact dual refinement of the final iterate; the objective
    is concave and the feasible set convex, so the maximizer is unique up to
    solver tolerance.  Raises DivergenceError if the objective decreases for
    50 consecutive accepted steps.
    """
    cfg = cfg or SolverConfig()
    prob = _PhiProblem(params)
    projector = FeasibleSetProjector(params, cfg.stencil_width)

    if cfg.step_size == "auto":
        step = 1.0 / (1.01 * prob.lipschitz())
    else:
        step = float(cfg.step_size)

    n = params.n
    u = np.zeros(n * n)
    phi_u = prob.phi(u)
    y_point = u.copy()
    t_momentum = 1.0
    decrease_run = 0
    stationarity = np.inf
    viol = 0.0
    iterations = 0

    # Per-step projections are warm-started (for half-spaces Dykstra is dual
    # coordinate ascent, sound under any nonnegative initialization) and run
    # on a small fixed pass budget.  The residual projection bias this
    # leaves is removed afterwards by the exact active-set refinement, so
    # the ascent phase only has to identify the active face.
    step_passes = min(8, cfg.projection_iters)

    def pg_step(point: np.ndarray) -> tuple[np.ndarray, float]:
        y = point + step * prob.grad(point)
        out, v, _ = projector.project(y, tol=cfg.kkt_tol, max_passes=step_passes)
        return _symmetrize(out.reshape(n, n)).ravel(), v

    # Accelerated scheme with a gradient-mapping restart: momentum resets
    # when it points against the projected-gradient step, a test that needs
    # no objective comparisons and so cannot stall on the phi ripples of an
    # inexact projection.  The momentum index is capped (the problem is
    # finitely conditioned; runaway extrapolation only compounds projection
    # error) and the best iterate seen is kept for a fair post-polish
    # comparison at the end.
    best_u, best_phi = u.copy(), phi_u
    # The quadratic part acts like an unweighted 5-point Laplacian matrix
    # (largest eigenvalue ~8, smallest nonzero ~pi^2/n^2), so the momentum
    # index is capped near sqrt(condition)/2; past that the extrapolation
    # only amplifies inexact-projection error without rate benefit.
    t_cap = max(4.0, 0.45 * n)
    # Once phi stops improving at the 1e-10 per-step scale over a restart
    # cycle, further passes only shuffle projection error; stop and hand the
    # iterate to the dual refinement.
    stall_window = max(50, n // 2)
    stall_mark, stall_phi = 0, phi_u
    for k in range(1, cfg.max_iters + 1):
        iterations = k
        u_old = u
        z, viol = pg_step(y_point)
        if float(np.dot(y_point - z, z - u_old)) > 0.0:
            t_momentum = 1.0
        phi_z = prob.phi(z)
        if phi_z < best_phi - 0.5 * max(1.0, abs(best_phi)):
            # Momentum-fed blow-up: hard reset from the best iterate.
            u = best_u.copy()
            phi_u = best_phi
            y_point = u.copy()
            t_momentum = 1.0
            projector.reset()
            decrease_run += 1
            if decrease_run >= 50:
                raise DivergenceError(
                    f"objective decreased for {decrease_run} consecutive steps "
                    f"(phi={phi_z:.12g}); check step size"
                )
            continue
        if phi_z < phi_u - 1e-12:
            decrease_run += 1
            if decrease_run >= 50:
                raise DivergenceError(
                    f"objective decreased for {decrease_run} consecutive steps "
                    f"(phi={phi_z:.12g}); check step size"
                )
        else:
            decrease_run = 0
        u, phi_u = z, phi_z
        if phi_u > best_phi:
            best_u, best_phi = u.copy(), phi_u
        if best_phi > stall_phi + 1e-10 * max(1.0, abs(best_phi)):
            stall_mark, stall_phi = k, best_phi
        elif k - stall_mark >= stall_window:
            break
        t_next = min(t_cap, 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_momentum**2)))
        y_point = u + ((t_momentum - 1.0) / t_next) * (u - u_old)
        t_momentum = t_next
        if callback is not None:
            callback(k, u.reshape(n, n), phi_u)
        if k % 25 == 0 or k == cfg.max_iters:
            mapped, _, _ = projector.project(
                u + step * prob.grad(u), tol=cfg.kkt_tol, max_passes=cfg.projection_iters
            )
            stationarity = float(np.abs(u - mapped).max()) / step
            if stationarity <= cfg.kkt_tol:
                break

    # Feasibility polish of the ascent iterate (warm duals continue; the
    # clip at zero preserves the monotone and directional-convexity
    # constraints and can only help the objective).
    def polish(point: np.ndarray) -> tuple[np.ndarray, float, float]:
        out, _, _ = projector.project(
            point,
            tol=min(cfg.kkt_tol, params.tol),
            max_passes=10 * cfg.projection_iters,
        )
        out = np.maximum(_symmetrize(out.reshape(n, n)), 0.0).ravel()
        return out, projector.max_violation(out), prob.phi(out)

    if best_phi > phi_u:
        u = best_u
    u, viol, phi_u = polish(u)

    # Cyclic projection passes propagate information one cell per pass, so
    # they cannot reach tight feasibility on fine grids in sensible time;
    # the ascent phase lands in a small neighborhood of the maximizer and
    # stalls there.  The dual refinement then solves the same program to
    # optimality and is accepted only if it neither loses objective nor
    # feasibility; on acceptance the report carries the full KKT residual
    # (gradient stationarity, worst violation, worst complementarity slip).
    refined = _dual_refine_cascade(prob, params, cfg.stencil_width)
    if refined is not None:
        u_r, lam_r, G = refined
        u_r = np.maximum(_symmetrize(u_r.reshape(n, n)), 0.0).ravel()
        viol_r = projector.max_violation(u_r)
        phi_r = prob.phi(u_r)
        if viol_r <= max(viol, cfg.kkt_tol) and phi_r >= phi_u - 1e-12:
            u, viol, phi_u = u_r, viol_r, phi_r
            slack = G @ u
            stationarity = max(
                float(np.abs(prob.grad(u) + G.T @ lam_r).max()),
                float(np.abs(lam_r * slack).max()),
            )

    field = ScalarField(params, u.reshape(n, n))
    report = SolveReport(
        phi=phi_u,
        iterations=iterations,
        primal_residual=viol,
        stationarity_residual=stationarity,
    )
    return field, report
