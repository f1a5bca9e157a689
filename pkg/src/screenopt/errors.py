"""Exception hierarchy shared by all solver modules.

Validation problems (bad parameters, malformed inputs) and numerical
failures (non-convergence, singular systems) are kept distinct so the
command line layer can map them to different exit codes.
"""


class ScreenOptError(Exception):
    """Base class for all package errors."""


class ValidationError(ScreenOptError):
    """Invalid parameters or malformed input data."""


class NumericalError(ScreenOptError):
    """A numerical procedure failed to produce a usable result."""


class SingularityError(NumericalError):
    """Evaluation requested too close to a singular point."""


class NonConvergenceError(NumericalError):
    """An iterative method exhausted its budget before reaching tolerance."""


class DivergenceError(NumericalError):
    """An ascent iteration lost monotonicity persistently (step-size bug)."""


class NotInFanError(NumericalError):
    """Point does not lie on any segment of the bunching fan."""


class EmptyRegionError(NumericalError):
    """A region required by the operation is empty."""


class SingularSystemError(NumericalError):
    """Discrete boundary value problem has no Dirichlet data to pin it."""
