"""Wasserstein barycenters of Gaussian and location-scatter families by fixed-point iteration."""

from .errors import (
    DimMismatch,
    EigenNoConvergence,
    InvalidProblem,
    MathError,
    MaxIterExceeded,
    NotCommuting,
    NotPSD,
    SingularMatrix,
)
from .fixpoint import (
    BarycenterResult,
    IterationConfig,
    IterationTrace,
    StepRecord,
    Variant,
    barycenter_commuting,
    ellipsoid_barycenter,
    solve,
    solve_location_scatter,
    step_paper,
    step_ru,
)
from .gausswass import (
    BarycenterProblem,
    BoundReport,
    GaussianMeasure,
    barycenter_mean,
    check_bounds,
    gelbrich_lower_bound,
    h_map,
    optimal_map_matrix,
    v_functional,
    w2_gaussian,
)

__version__ = "0.1.0"

__all__ = [
    "BarycenterProblem",
    "BarycenterResult",
    "BoundReport",
    "DimMismatch",
    "EigenNoConvergence",
    "GaussianMeasure",
    "InvalidProblem",
    "IterationConfig",
    "IterationTrace",
    "MathError",
    "MaxIterExceeded",
    "NotCommuting",
    "NotPSD",
    "SingularMatrix",
    "StepRecord",
    "Variant",
    "barycenter_commuting",
    "barycenter_mean",
    "check_bounds",
    "ellipsoid_barycenter",
    "gelbrich_lower_bound",
    "h_map",
    "optimal_map_matrix",
    "solve",
    "solve_location_scatter",
    "step_paper",
    "step_ru",
    "v_functional",
    "w2_gaussian",
]
