"""Polyharmonic heat flow of closed plane curves.

Simulation of the flow family whose normal speed is (-1)^p times the 2p-th
arclength derivative of curvature, together with the diagnostics that make
its conservation laws, monotone quantities, a-priori bounds, convexity
waiting time and exponential convergence to round circles checkable
numerically.
"""

from .geometry import (
    ClosedCurve,
    DegenerateCurveError,
    GeometryCache,
    UnderResolvedError,
    derive_geometry,
    embeddedness_bound_check,
    max_multiplicity,
    multiplicity_report,
    winding_number,
)
from .flow import (
    FlowConfig,
    FlowState,
    RunResult,
    SingularityError,
    curvature_rate,
    initial_state,
    normal_velocity,
    run,
    step,
)
from .diagnostics import (
    DiagnosticsRecord,
    FitResult,
    Verdict,
    fit_exponential_rate,
    kosc_bound_check,
    kosc_identity_residual,
    predicted_rates,
    sup_deviation,
    waiting_time,
)
from .shapes import generate_shape
from .oracles import (
    circle_mode_rate_numeric,
    fd_curvature,
    linearized_mode_rate,
    polygon_area,
    quadrature_functionals,
)
from .inequalities import (
    iterated_interp_check,
    p_term_norm,
    sup_bound_check,
    wirtinger_check,
)

__version__ = "0.1.0"

__all__ = [
    "ClosedCurve",
    "DegenerateCurveError",
    "DiagnosticsRecord",
    "FitResult",
    "FlowConfig",
    "FlowState",
    "GeometryCache",
    "RunResult",
    "SingularityError",
    "UnderResolvedError",
    "Verdict",
    "circle_mode_rate_numeric",
    "curvature_rate",
    "derive_geometry",
    "embeddedness_bound_check",
    "fd_curvature",
    "fit_exponential_rate",
    "generate_shape",
    "initial_state",
    "iterated_interp_check",
    "kosc_bound_check",
    "kosc_identity_residual",
    "linearized_mode_rate",
    "max_multiplicity",
    "multiplicity_report",
    "normal_velocity",
    "p_term_norm",
    "polygon_area",
    "predicted_rates",
    "quadrature_functionals",
    "run",
    "step",
    "sup_bound_check",
    "sup_deviation",
    "waiting_time",
    "winding_number",
    "wirtinger_check",
]
