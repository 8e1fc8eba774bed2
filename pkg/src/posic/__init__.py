"""Positive integral control of positive systems.

Stability bounds, equilibria and simulation for antithetic, exponential and
logistic integral controllers acting on linear and nonlinear positive plants.
"""

from .analysis import (
    StabilityBounds,
    StabilityVerdict,
    alpha_bar_disturbed,
    alpha_bar_inf,
    bifurcation_sweep,
    compute_bounds,
    disturbance_admissible,
    eta_bar_inf,
    k_bar_inf,
    k_bar_local,
    k_bar_nonlinear,
    local_stability,
    m_matrix,
    rejection_check,
    root_locus,
    spr_test,
    xi_bar_inf,
)
from .builtins import BUILTINS, build
from .controllers import (
    Antithetic,
    ClosedLoop,
    Disturbance,
    Exponential,
    Logistic,
    RegularizedTable,
    StandardIntegral,
    closed_loop_jacobian,
    closed_loop_rhs,
    equilibria,
    regularized_integrator_rhs,
)
from .poly import Polynomial, jomega_split, poly_roots, routh_hurwitz
from .sim import SimConfig, Trajectory, compare_to_standard_integral, integrate, tracking_metrics
from .sysmodel import (
    LtiSystem,
    NonlinearSystem,
    dc_gain,
    is_internally_positive,
    is_metzler,
    linearize,
    steady_state_map,
    transfer_function,
)

__version__ = "0.1.0"

__all__ = [
    "StabilityBounds",
    "StabilityVerdict",
    "alpha_bar_disturbed",
    "alpha_bar_inf",
    "bifurcation_sweep",
    "compute_bounds",
    "disturbance_admissible",
    "eta_bar_inf",
    "k_bar_inf",
    "k_bar_local",
    "k_bar_nonlinear",
    "local_stability",
    "m_matrix",
    "rejection_check",
    "root_locus",
    "spr_test",
    "xi_bar_inf",
    "Antithetic",
    "ClosedLoop",
    "Disturbance",
    "Exponential",
    "Logistic",
    "RegularizedTable",
    "StandardIntegral",
    "closed_loop_jacobian",
    "closed_loop_rhs",
    "equilibria",
    "regularized_integrator_rhs",
    "LtiSystem",
    "NonlinearSystem",
    "dc_gain",
    "is_internally_positive",
    "is_metzler",
    "linearize",
    "steady_state_map",
    "transfer_function",
    "BUILTINS",
    "build",
    "Polynomial",
    "jomega_split",
    "poly_roots",
    "routh_hurwitz",
    "SimConfig",
    "Trajectory",
    "compare_to_standard_integral",
    "integrate",
    "tracking_metrics",
]
