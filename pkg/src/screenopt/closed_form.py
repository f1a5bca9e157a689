"""Closed forms for the blunt-bunching utility profile.

On the strip where agents bunch along anti-diagonal segments, the indirect
utility depends on t = x1 + x2 only and has the explicit form

    U(t) = (3/8) t^2 - (a/2) t - (1/2) log|t - 2a| + C0.

The exclusion level t05 and the integration constant C0 are pinned by the
matching conditions U(t05) = U'(t05) = 0.  Multiplying U'(t) = 0 through by
(t - 2a) shows t05 is the larger root of the quadratic

    3 t^2 - 8 a t + 4 a^2 - 2 = 0.

The classic constant-interface ansatz closes the strip at t15 = 2a + sqrt(6)/3,
which is also where U' equals a, so the ansatz gradient on the upper interface
is (a, a).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularityError, ValidationError
from .params import ModelParams

# Closest approach to the logarithmic singularity at t = 2a that we evaluate.
SINGULARITY_GUARD = 1e-12


def exclusion_level(a: float) -> float:
    """Larger root of 3t^2 - 8at + 4a^2 - 2 = 0 (valid for a >= 0)."""
    return (4.0 * a + math.sqrt(4.0 * a * a + 6.0)) / 3.0


def ansatz_strip_top(a: float) -> float:
    """Upper strip level of the constant-interface ansatz, 2a + sqrt(6)/3."""
    return 2.0 * a + math.sqrt(6.0) / 3.0


@dataclass(frozen=True)
class BluntProfile:
    """Blunt-bunching profile U with its matching constants.

    Attributes
    ----------
    a : float
        Type square offset.
    t05 : float
        Exclusion boundary level, the positive root of U' exceeding 2a.
    C0 : float
        Integration constant making U(t05) = 0.
    t15_rc : float
        Constant-interface ansatz upper bound, 2a + sqrt(6)/3.
    """

    a: float
    t05: float
    C0: float
    t15_rc: float

    def _guard(self, t: np.ndarray | float) -> None:
        if np.any(np.abs(np.asarray(t) - 2.0 * self.a) < SINGULARITY_GUARD):
            raise SingularityError(
                f"U evaluated within {SINGULARITY_GUARD} of the singular point t = 2a"
            )

    def value(self, t: np.ndarray | float) -> np.ndarray | float:
        """U(t)."""
        self._guard(t)
        t = np.asarray(t, dtype=float)
        out = (
            0.375 * t * t
            - 0.5 * self.a * t
            - 0.5 * np.log(np.abs(t - 2.0 * self.a))
            + self.C0
        )
        return out if out.ndim else float(out)

    def derivative(self, t: np.ndarray | float) -> np.ndarray | float:
        """U'(t) = (3/4) t - a/2 - 1 / (2 (t - 2a))."""
        self._guard(t)
        t = np.asarray(t, dtype=float)
        out = 0.75 * t - 0.5 * self.a - 0.5 / (t - 2.0 * self.a)
        return out if out.ndim else float(out)

    def second_derivative(self, t: np.ndarray | float) -> np.ndarray | float:
        """U''(t) = 3/4 + 1 / (2 (t - 2a)^2); strictly > 3/4 for t != 2a."""
        self._guard(t)
        t = np.asarray(t, dtype=float)
        out = 0.75 + 0.5 / (t - 2.0 * self.a) ** 2
        return out if out.ndim else float(out)

    def evaluate(self, t: np.ndarray | float, order: int = 0):
        """U, U' or U'' depending on ``order`` in {0, 1, 2}."""
        if order == 0:
            return self.value(t)
        if order == 1:
            return self.derivative(t)
        if order == 2:
            return self.second_derivative(t)
        raise ValidationError(f"order must be 0, 1 or 2, got {order}")

    def value_clipped(self, t: np.ndarray | float) -> np.ndarray | float:
        """U extended by zero below t05 (matches u = 0 on the excluded region)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        above = t > self.t05
        if np.any(above):
            out[above] = self.value(t[above])
        return out if out.ndim else float(out)

    def derivative_clipped(self, t: np.ndarray | float) -> np.ndarray | float:
        """U' extended by zero below t05."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        above = t > self.t05
        if np.any(above):
            out[above] = self.derivative(t[above])
        return out if out.ndim else float(out)


def make_blunt_profile(params: ModelParams) -> BluntProfile:
    """Build the blunt-bunching profile for the given model offset.

    t05 comes from the closed quadratic-root formula (no iteration); C0 is
    chosen so U(t05) = 0.  t05 > 2a always, so the log argument is positive.
    """
    a = params.a
    t05 = exclusion_level(a)
    c0 = -(0.375 * t05 * t05) + 0.5 * a * t05 + 0.5 * math.log(t05 - 2.0 * a)
    return BluntProfile(a=a, t05=t05, C0=c0, t15_rc=ansatz_strip_top(a))


def rc_strip_bounds(params: ModelParams) -> tuple[float, float]:
    """The two constant levels bounding the constant-interface ansatz strip."""
    return exclusion_level(params.a), ansatz_strip_top(params.a)


def profile_table(
    profile: BluntProfile,
    t_min: float | None = None,
    t_max: float | None = None,
    num: int = 201,
) -> np.ndarray:
    """Columns (t, U, U', U'') sampled on [t_min, t_max] (default: the strip)."""
    if num < 2:
        raise ValidationError("need at least 2 table rows")
    lo = profile.t05 if t_min is None else float(t_min)
    hi = profile.t15_rc if t_max is None else float(t_max)
    if not hi > lo:
        raise ValidationError("table range must have t_max > t_min")
    t = np.linspace(lo, hi, num)
    return np.column_stack(
        [t, profile.value(t), profile.derivative(t), profile.second_derivative(t)]
    )
