"""Model parameters for the screening problem on the square of agent types.

The agent type square is [a, a+1] x [a, a+1] with uniform unit density,
the production cost is |y|^2 / 2, and both are fixed constants of the
model; only the offset ``a`` varies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class ModelParams:
    """Scalar model and discretization parameters.

    Attributes
    ----------
    a : float
        Lower-left coordinate of the type square [a, a+1]^2; must be > 0.
    n : int
        Grid points per axis (>= 16); spacing is h = 1/(n-1).
    tol : float
        Generic numerical tolerance used for feasibility checks.
    """

    a: float
    n: int = 64
    tol: float = 1e-8

    def __post_init__(self) -> None:
        if not (self.a > 0.0) or not np.isfinite(self.a):
            raise ValidationError(f"a must be a positive real, got {self.a}")
        if int(self.n) != self.n or self.n < 16:
            raise ValidationError(f"n must be an integer >= 16, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if not (self.tol > 0.0):
            raise ValidationError(f"tol must be positive, got {self.tol}")

    @property
    def h(self) -> float:
        """Grid spacing along each axis."""
        return 1.0 / (self.n - 1)

    @property
    def axis(self) -> np.ndarray:
        """Node coordinates a, a+h, ..., a+1 along one axis."""
        return self.a + np.arange(self.n) * self.h

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinate arrays (X1, X2), indexed [i, j] -> (a+i*h, a+j*h)."""
        ax = self.axis
        return np.meshgrid(ax, ax, indexing="ij")
