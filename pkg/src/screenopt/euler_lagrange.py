"""Targeted-bunching fan construction above the diagonal.

The targeted-bunching set above the diagonal is a fan of straight isochoice
segments, one per angle theta in [-pi/4, pi/2).  The segment at angle theta
starts at (a, h(theta)) on the vertical line x1 = a, has direction
e(theta) = (cos theta, sin theta) and length R(theta), and carries the
affine utility

    u((a, h(theta)) + r e(theta)) = m(theta) r + b(theta),   0 <= r <= R(theta).

Stationarity of the profit functional across the fan gives a second-order
ODE for the slope m,

    (m'' + m - 2R) (m' sin - m cos + a) = (3/2) R^2 cos,

solved here in explicit form for m''; the left-endpoint height h and offset
b are co-integrated through

    h' = R^2 / (2 (m' sin - m cos + a))      (identically (m''+m-2R)/(3 cos))
    b' = (m' cos + m sin) h'.

Initial data at theta = -pi/4 tie the fan continuously and differentiably to
the blunt profile U at the line x1 + x2 = t10:  m = 0, m' = sqrt(2) U'(t10),
h = t10 - a, b = U(t10).  The gradient along a segment is
Du = m e + m' e_perp, which is what the interface matching conditions use.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator
from scipy.optimize import brentq

from .closed_form import make_blunt_profile
from .errors import (
    NonConvergenceError,
    NotInFanError,
    SingularityError,
    ValidationError,
)
from .params import ModelParams

THETA_START = -np.pi / 4
THETA_CAP = np.pi / 2
DENOM_GUARD = 1e-8


@dataclass(frozen=True)
class BunchInput:
    """Fan data: blunt-region top t10 and sampled segment-length profile R."""

    a: float
    t10: float
    theta: np.ndarray
    r: np.ndarray

    def __post_init__(self) -> None:
        theta = np.asarray(self.theta, dtype=float)
        r = np.asarray(self.r, dtype=float)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "r", r)
        if not np.isfinite(self.t10) or not (
            2 * self.a - 1e-12 <= self.t10 <= 2 * self.a + 1 + 1e-12
        ):
            raise ValidationError("t10 must lie in [2a, 2a+1]")
        if theta.ndim != 1 or theta.shape != r.shape or theta.size < 2:
            raise ValidationError("need >= 2 aligned (theta, R) samples")
        if abs(theta[0] - THETA_START) > 1e-12:
            raise ValidationError("R samples must start at theta = -pi/4")
        if not (np.diff(theta) > 0).all():
            raise ValidationError("theta samples must increase strictly")
        if theta[-1] > THETA_CAP + 1e-12:
            raise ValidationError("theta samples must not exceed pi/2")
        if (r < -1e-12).any():
            raise ValidationError("R samples must be nonnegative")
        if (r >= np.sqrt(2.0)).any():
            raise ValidationError("R samples must stay below sqrt(2)")
        r0_expected = (self.t10 - 2 * self.a) / np.sqrt(2.0)
        if abs(r[0] - r0_expected) > 1e-10:
            raise ValidationError(
                f"R(-pi/4) = {r[0]:.12g} must equal (t10-2a)/sqrt(2) = {r0_expected:.12g}"
            )
        theta.setflags(write=False)
        r.setflags(write=False)

    @cached_property
    def _interp(self) -> PchipInterpolator:
        # Pchip keeps the interpolant inside the local data range, so
        # nonnegative samples give a nonnegative R between knots.
        return PchipInterpolator(self.theta, np.maximum(self.r, 0.0))

    def r_of(self, theta):
        return np.maximum(self._interp(theta), 0.0)

    def degenerate(self) -> bool:
        return self.t10 <= 2 * self.a + 1e-12

    def positivity_end(self) -> float:
        """First zero of R past the start, else the end of the sampled range."""
        end = min(float(self.theta[-1]), THETA_CAP)
        if self.degenerate():
            return THETA_START
        grid = np.linspace(THETA_START, end, 2049)
        vals = np.asarray(self._interp(grid), dtype=float)
        below = np.nonzero(vals <= 0.0)[0]
        below = below[below > 0]
        if below.size == 0:
            return end
        k = int(below[0])
        if vals[k] == 0.0:
            return float(grid[k])
        return float(brentq(self._interp, grid[k - 1], grid[k], xtol=1e-13))


@dataclass(frozen=True)
class FanSolution:
    """Sampled fan: aligned arrays over theta plus Hermite interpolants."""

    a: float
    t10: float
    theta: np.ndarray
    m: np.ndarray
    m_prime: np.ndarray
    h: np.ndarray
    b: np.ndarray
    r: np.ndarray
    m_pp: np.ndarray
    h_prime: np.ndarray
    b_prime: np.ndarray

    def __post_init__(self) -> None:
        arrays = (self.theta, self.m, self.m_prime, self.h, self.b, self.r,
                  self.m_pp, self.h_prime, self.b_prime)
        sizes = {arr.shape for arr in arrays}
        if len(sizes) != 1:
            raise ValidationError("fan arrays must be aligned")
        if not self.empty:
            if abs(self.m[0]) > 1e-12:
                raise ValidationError("fan must start with m(-pi/4) = 0")
            if self.theta[-1] > THETA_CAP + 1e-9:
                raise ValidationError("fan extends past theta = pi/2")
        for arr in arrays:
            arr.setflags(write=False)

    @property
    def empty(self) -> bool:
        return self.theta.size == 0

    @property
    def theta_max(self) -> float:
        return float(self.theta[-1]) if not self.empty else THETA_START

    @cached_property
    def m_spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.theta, self.m, self.m_prime)

    @cached_property
    def m_prime_spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.theta, self.m_prime, self.m_pp)

    @cached_property
    def h_spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.theta, self.h, self.h_prime)

    @cached_property
    def b_spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.theta, self.b, self.b_prime)

    @cached_property
    def r_spline(self) -> PchipInterpolator:
        return PchipInterpolator(self.theta, np.maximum(self.r, 0.0))

    def left_endpoints(self) -> np.ndarray:
        pts = np.empty((self.theta.size, 2))
        pts[:, 0] = self.a
        pts[:, 1] = self.h
        return pts

    def right_endpoints(self) -> np.ndarray:
        pts = np.empty((self.theta.size, 2))
        pts[:, 0] = self.a + self.r * np.cos(self.theta)
        pts[:, 1] = self.h + self.r * np.sin(self.theta)
        return pts

    def segment_gradient(self, theta) -> np.ndarray:
        """Du on the segment at angle theta: m e(theta) + m' e_perp(theta)."""
        th = np.asarray(theta, dtype=float)
        m = self.m_spline(th)
        mp = self.m_prime_spline(th)
        g = np.empty(th.shape + (2,))
        g[..., 0] = m * np.cos(th) - mp * np.sin(th)
        g[..., 1] = m * np.sin(th) + mp * np.cos(th)
        return g


def _empty_fan(a: float, t10: float) -> FanSolution:
    z = np.empty(0)
    return FanSolution(a=a, t10=t10, theta=z, m=z, m_prime=z, h=z, b=z, r=z,
                       m_pp=z, h_prime=z, b_prime=z)


def _rhs(theta: float, y: np.ndarray, a: float, r_of) -> np.ndarray:
    m, mp, h, b = y
    # Generous physical bounds: the fan lives inside the type square, so a
    # trajectory with |m| or h far outside it has already gone through a
    # near-singular denominator; failing here keeps runaway inputs (as the
    # calibration search will produce) from burning the full refinement
    # budget before erroring out.
    if abs(m) > 10.0 * (1.0 + a) or not (a - 1.0 <= h <= a + 2.0) or abs(b) > 50.0 * (1.0 + a) ** 2:
        raise SingularityError(
            f"fan trajectory left physical bounds at theta={theta:.6f} "
            f"(m={m:.3e}, h={h:.3e}, b={b:.3e})"
        )
    rr = float(r_of(theta))
    s, c = np.sin(theta), np.cos(theta)
    denom = mp * s - m * c + a
    if abs(denom) < DENOM_GUARD:
        raise SingularityError(
            f"fan ODE denominator m' sin - m cos + a = {denom:.3e} at theta={theta:.6f}"
        )
    mpp = 2.0 * rr - m + 1.5 * rr * rr * c / denom
    hp = rr * rr / (2.0 * denom)
    bp = (mp * c + m * s) * hp
    return np.array([mp, mpp, hp, bp])


def _rk4(y0: np.ndarray, theta0: float, theta1: float, steps: int, a: float, r_of):
    thetas = np.linspace(theta0, theta1, steps + 1)
    dt = (theta1 - theta0) / steps
    out = np.empty((steps + 1, 4))
    out[0] = y0
    y = y0.copy()
    for k in range(steps):
        t = thetas[k]
        k1 = _rhs(t, y, a, r_of)
        k2 = _rhs(t + 0.5 * dt, y + 0.5 * dt * k1, a, r_of)
        k3 = _rhs(t + 0.5 * dt, y + 0.5 * dt * k2, a, r_of)
        k4 = _rhs(t + dt, y + dt * k3, a, r_of)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = y
    return thetas, out


def solve_fan(params: ModelParams, fan_input: BunchInput, step: float = 1e-2) -> FanSolution:
    """Integrate the fan system by fixed-step RK4 with step halving to 1e-8."""
    if step <= 0:
        raise ValidationError("step must be positive")
    if abs(fan_input.a - params.a) > 1e-12:
        raise ValidationError("BunchInput.a does not match params.a")
    a, t10 = params.a, fan_input.t10
    if fan_input.degenerate():
        return _empty_fan(a, t10)

    theta_end = fan_input.positivity_end()
    if theta_end <= THETA_START + 1e-12:
        return _empty_fan(a, t10)

    profile = make_blunt_profile(params)
    y0 = np.array([
        0.0,
        np.sqrt(2.0) * profile.derivative(t10),
        t10 - a,
        profile.value(t10),
    ])

    steps = max(8, int(np.ceil((theta_end - THETA_START) / step)))
    thetas, states = _rk4(y0, THETA_START, theta_end, steps, a, fan_input.r_of)
    prev_diff = np.inf
    grew = 0
    for _ in range(10):
        steps2 = 2 * steps
        thetas2, states2 = _rk4(y0, THETA_START, theta_end, steps2, a, fan_input.r_of)
        diff = float(np.abs(states2[::2] - states).max())
        thetas, states, steps = thetas2, states2, steps2
        if diff < 1e-8:
            break
        # A fourth-order method on a smooth trajectory shrinks the halving
        # difference sixteenfold; repeated growth marks a trajectory that
        # passes near the denominator singularity, not a resolution issue.
        grew = grew + 1 if diff > prev_diff else 0
        if grew >= 2:
            raise SingularityError(
                f"fan RK4 halving differences grow ({prev_diff:.3e} -> {diff:.3e}); "
                "trajectory is not smooth over the requested range"
            )
        prev_diff = diff
    else:
        raise NonConvergenceError(
            f"fan RK4 did not reach 1e-8 between refinements (last diff {diff:.3e})"
        )

    m, mp, h, b = states.T
    derivs = np.array([_rhs(t, y, a, fan_input.r_of) for t, y in zip(thetas, states)])
    return FanSolution(
        a=a, t10=t10, theta=thetas.copy(),
        m=m.copy(), m_prime=mp.copy(), h=h.copy(), b=b.copy(),
        r=np.asarray(fan_input.r_of(thetas), dtype=float),
        m_pp=derivs[:, 1].copy(), h_prime=derivs[:, 2].copy(), b_prime=derivs[:, 3].copy(),
    )


def _cross_nodes(fan: FanSolution, x1: float, x2: float) -> np.ndarray:
    return (x1 - fan.a) * np.sin(fan.theta) - (x2 - fan.h) * np.cos(fan.theta)


def u1_minus_eval(fan: FanSolution, x) -> float:
    """Utility at a point of the fan via bisection on the segment cross product."""
    if fan.empty:
        raise NotInFanError("fan is empty")
    x1, x2 = float(x[0]), float(x[1])

    def cross(th):
        return (x1 - fan.a) * np.sin(th) - (x2 - fan.h_spline(th)) * np.cos(th)

    c = _cross_nodes(fan, x1, x2)
    hit = np.nonzero(np.abs(c) <= 1e-14)[0]
    if hit.size:
        theta_star = float(fan.theta[hit[0]])
    else:
        sign_change = np.nonzero(c[:-1] * c[1:] < 0.0)[0]
        if sign_change.size == 0:
            raise NotInFanError(f"point ({x1:.6g}, {x2:.6g}) crosses no fan segment")
        k = int(sign_change[0])
        theta_star = float(brentq(cross, fan.theta[k], fan.theta[k + 1], xtol=1e-14))

    radius = (x1 - fan.a) * np.cos(theta_star) + (x2 - fan.h_spline(theta_star)) * np.sin(
        theta_star
    )
    if radius < -1e-9:
        raise NotInFanError("point lies behind the segment's left endpoint")
    r_max = float(fan.r_spline(theta_star))
    if radius > r_max + 1e-9:
        raise NotInFanError(
            f"point at radius {radius:.6g} beyond segment length {r_max:.6g}"
        )
    radius = min(max(radius, 0.0), r_max)
    return float(fan.m_spline(theta_star)) * radius + float(fan.b_spline(theta_star))


def fan_values_batch(
    fan: FanSolution, points: np.ndarray, clamp: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized fan evaluation; returns (values, in_fan_mask).

    With clamp=True, points without a bracketing segment use the nearest
    sampled segment and radii are clipped to [0, R]; the mask still reports
    which points were genuinely inside.  Used when assembling a global field
    where hairline gaps along region seams need a continuous fallback.
    """
    if fan.empty:
        vals = np.zeros(len(points))
        return vals, np.zeros(len(points), dtype=bool)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    x1 = pts[:, 0]
    x2 = pts[:, 1]
    sin_t = np.sin(fan.theta)[None, :]
    cos_t = np.cos(fan.theta)[None, :]
    cross = (x1[:, None] - fan.a) * sin_t - (x2[:, None] - fan.h[None, :]) * cos_t

    prod = cross[:, :-1] * cross[:, 1:]
    has_bracket = (prod <= 0.0).any(axis=1)
    first = np.argmax(prod <= 0.0, axis=1)
    nearest = np.argmin(np.abs(cross), axis=1)

    lo = np.where(has_bracket, fan.theta[first], fan.theta[nearest])
    hi = np.where(
        has_bracket, fan.theta[np.minimum(first + 1, fan.theta.size - 1)], lo
    )
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        cmid = (x1 - fan.a) * np.sin(mid) - (x2 - fan.h_spline(mid)) * np.cos(mid)
        clo = (x1 - fan.a) * np.sin(lo) - (x2 - fan.h_spline(lo)) * np.cos(lo)
        left = clo * cmid <= 0.0
        hi = np.where(left, mid, hi)
        lo = np.where(left, lo, mid)
    theta_star = 0.5 * (lo + hi)

    radius = (x1 - fan.a) * np.cos(theta_star) + (
        x2 - fan.h_spline(theta_star)
    ) * np.sin(theta_star)
    r_max = np.asarray(fan.r_spline(theta_star), dtype=float)
    inside = has_bracket & (radius >= -1e-9) & (radius <= r_max + 1e-9)
    radius_used = np.clip(radius, 0.0, r_max) if clamp else radius
    vals = fan.m_spline(theta_star) * radius_used + fan.b_spline(theta_star)
    return np.asarray(vals, dtype=float), inside


@dataclass(frozen=True)
class FanDiagnostics:
    inside_square: bool
    above_diagonal: bool
    segments_nested: bool
    h_monotone: bool
    worst_outside: float
    worst_below_diagonal: float
    worst_crossing: float
    worst_h_decrease: float

    @property
    def all_ok(self) -> bool:
        return (
            self.inside_square
            and self.above_diagonal
            and self.segments_nested
            and self.h_monotone
        )


def validate_fan_geometry(
    fan: FanSolution, params: ModelParams, tol: float = 1e-9
) -> FanDiagnostics:
    """Containment, diagonal-side, nesting, and h-monotonicity diagnostics."""
    if fan.empty:
        return FanDiagnostics(True, True, True, True, 0.0, 0.0, 0.0, 0.0)
    lo_edge, hi_edge = params.a, params.a + 1
    pts = np.vstack([fan.left_endpoints(), fan.right_endpoints()])
    outside = np.maximum(lo_edge - pts, pts - hi_edge).max()
    below_diag = (pts[:, 0] - pts[:, 1]).max()
    dh = np.diff(fan.h)
    crossing = -(np.cos(fan.theta[:-1]) * dh).min() if dh.size else 0.0
    h_dec = -dh.min() if dh.size else 0.0
    return FanDiagnostics(
        inside_square=bool(outside <= tol),
        above_diagonal=bool(below_diag <= tol),
        segments_nested=bool(crossing <= tol),
        h_monotone=bool(h_dec <= tol),
        worst_outside=float(max(outside, 0.0)),
        worst_below_diagonal=float(max(below_diag, 0.0)),
        worst_crossing=float(max(crossing, 0.0)),
        worst_h_decrease=float(max(h_dec, 0.0)),
    )


FAN_CSV_HEADER = ["theta", "m", "m_prime", "h", "b", "R"]


def write_fan_csv(fan: FanSolution, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FAN_CSV_HEADER)
        for row in zip(fan.theta, fan.m, fan.m_prime, fan.h, fan.b, fan.r):
            writer.writerow([f"{v:.17g}" for v in row])


def read_r_samples_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read (theta, R) sample columns with header 'theta,R'."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [c.strip() for c in next(reader)]
        if header != ["theta", "R"]:
            raise ValidationError(f"expected header 'theta,R' in {path}")
        rows = [(float(r[0]), float(r[1])) for r in reader if r]
    if len(rows) < 2:
        raise ValidationError(f"{path} holds fewer than two samples")
    theta = np.array([r[0] for r in rows])
    rvals = np.array([r[1] for r in rows])
    return theta, rvals
