"""Numerical toolkit for a bilinear monopoly-screening model on a square
of consumer types.

The library solves the seller's problem three independent ways and checks
them against each other: direct maximization of the profit functional over
convex nondecreasing surplus fields, a closed-form one-dimensional profile
valid where bunching collapses the type square onto its diagonal, and a
characteristic-fan construction coupled to a mixed-boundary Poisson solve
on the customized region.  Dual-side outputs (price menu, product
intensity) come from exact discrete convex conjugation.
"""

from .closed_form import (
    BluntProfile,
    ansatz_strip_top,
    exclusion_level,
    make_blunt_profile,
    profile_table,
    rc_strip_bounds,
)
from .direct_solver import (
    SolveReport,
    SolverConfig,
    evaluate_phi,
    phi_gradient,
    project_feasible,
    solve,
)
from .errors import (
    DivergenceError,
    EmptyRegionError,
    NonConvergenceError,
    NotInFanError,
    NumericalError,
    ScreenOptError,
    SingularityError,
    SingularSystemError,
    ValidationError,
)
from .euler_lagrange import (
    BunchInput,
    FanSolution,
    fan_values_batch,
    read_r_samples_csv,
    solve_fan,
    u1_minus_eval,
    validate_fan_geometry,
    write_fan_csv,
)
from .free_boundary_bvp import (
    BvpSolution,
    CalibrationConfig,
    CalibrationResult,
    PolygonalDomain,
    RefutationReport,
    assemble_field,
    build_ansatz_field,
    calibrate,
    extra_neumann_residual,
    fan_interface_data,
    refute_rc,
    solve_bvp,
)
from .grid_field import (
    HessianField,
    ScalarField,
    VectorField,
    gradient,
    hessian,
    integrate,
    min_second_difference,
    read_field_csv,
    write_field_csv,
)
from .params import ModelParams
from .pipeline import STAGES, run_pipeline
from .pricing import (
    PriceMenu,
    ProductIntensity,
    conjugate_on_square,
    double_conjugate_gap,
    price_menu,
    product_intensity,
    write_intensity_csv,
    write_menu_csv,
)
from .regions import (
    InterfaceCurve,
    RegionLabel,
    RegionMap,
    classify,
    extract_interface,
    read_interface_csv,
    write_interface_csv,
    write_labels_csv,
)

__version__ = "0.1.0"

__all__ = [
    "BluntProfile",
    "BunchInput",
    "BvpSolution",
    "CalibrationConfig",
    "CalibrationResult",
    "DivergenceError",
    "EmptyRegionError",
    "FanSolution",
    "HessianField",
    "InterfaceCurve",
    "ModelParams",
    "NonConvergenceError",
    "NotInFanError",
    "NumericalError",
    "PolygonalDomain",
    "PriceMenu",
    "ProductIntensity",
    "RefutationReport",
    "RegionLabel",
    "RegionMap",
    "STAGES",
    "ScalarField",
    "ScreenOptError",
    "SingularSystemError",
    "SingularityError",
    "SolveReport",
    "SolverConfig",
    "ValidationError",
    "VectorField",
    "ansatz_strip_top",
    "assemble_field",
    "build_ansatz_field",
    "calibrate",
    "classify",
    "conjugate_on_square",
    "double_conjugate_gap",
    "evaluate_phi",
    "exclusion_level",
    "extra_neumann_residual",
    "extract_interface",
    "fan_interface_data",
    "fan_values_batch",
    "gradient",
    "hessian",
    "integrate",
    "make_blunt_profile",
    "min_second_difference",
    "phi_gradient",
    "price_menu",
    "product_intensity",
    "profile_table",
    "project_feasible",
    "rc_strip_bounds",
    "read_field_csv",
    "read_interface_csv",
    "read_r_samples_csv",
    "refute_rc",
    "run_pipeline",
    "solve",
    "solve_bvp",
    "solve_fan",
    "u1_minus_eval",
    "validate_fan_geometry",
    "write_fan_csv",
    "write_field_csv",
    "write_intensity_csv",
    "write_interface_csv",
    "write_labels_csv",
    "write_menu_csv",
]
