"""Characteristic fan behind a curved interface.

On the non-customized set above the exclusion region, the optimal field is
affine along straight segments that fan out from the left edge.  Given the
bunched-region top t10 and a segment-length profile R(theta), the segment
data (slope m, foot height h, intercept b) solves a second-order system in
the fan angle, integrated here by fixed-step RK4 with Richardson control.
The demo builds a tame profile, integrates it, checks the geometry, and
demonstrates the failure mode that a careless profile produces.
"""

import pathlib

import numpy as np

from screenopt import (
    BunchInput,
    ModelParams,
    SingularityError,
    make_blunt_profile,
    solve_fan,
    u1_minus_eval,
    validate_fan_geometry,
    write_fan_csv,
)
from screenopt.euler_lagrange import THETA_START

out = pathlib.Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

a, t10 = 1.0, 2.55
params = ModelParams(a=a, n=64)
prof = make_blunt_profile(params)

theta = np.linspace(THETA_START, 0.9, 40)
r0 = (t10 - 2 * a) / np.sqrt(2.0)
r = r0 * (1.0 + 0.35 * np.sin(theta - THETA_START)) * np.exp(-0.4 * (theta - THETA_START))
r[0] = r0  # pinned: the first segment is the top edge of the bunched region

fan = solve_fan(params, BunchInput(a=a, t10=t10, theta=theta, r=r), step=5e-3)
print(f"fan: {fan.theta.size} nodes on [{fan.theta[0]:.4f}, {fan.theta[-1]:.4f}]")
print(
    f"initial conditions: m={fan.m[0]:+.2e} (=0), h-(t10-a)={fan.h[0] - (t10 - a):+.2e}, "
    f"b-U(t10)={fan.b[0] - prof.value(t10):+.2e}"
)

diag = validate_fan_geometry(fan, params)
print(
    f"geometry: inside={diag.inside_square} above-diagonal={diag.above_diagonal} "
    f"nested={diag.segments_nested} h-monotone={diag.h_monotone}"
)

# utility along one mid-fan segment is affine: sample three collinear points
th = 0.25
radius = float(fan.r_spline(th))
left = np.array([a, float(fan.h_spline(th))])
d = np.array([np.cos(th), np.sin(th)])
p0, p1 = left + 0.1 * radius * d, left + 0.9 * radius * d
mid = 0.5 * (p0 + p1)
vals = [u1_minus_eval(fan, p) for p in (p0, p1, mid)]
print(f"segment affinity residual at theta={th}: {0.5 * (vals[0] + vals[1]) - vals[2]:+.1e}")

write_fan_csv(fan, out / "fan.csv")
print(f"wrote {out / 'fan.csv'}")

# a constant R cannot stay tame: the denominator degenerates and the
# integrator reports it instead of returning garbage
try:
    bad_theta = np.linspace(THETA_START, 1.2, 30)
    solve_fan(params, BunchInput(a=a, t10=t10, theta=bad_theta, r=np.full(30, r0)), step=5e-3)
except SingularityError as err:
    print(f"constant-R profile rejected as expected: {err}")
