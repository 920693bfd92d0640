"""driftlab: numerical laboratory for polynomial-growth drift-harmonic functions
on warped products with paraboloidal asymptotics."""

from .spectrum import Spectrum, sphere_spectrum, torus_spectrum, dimension_count
from .geometry import (APProfile, model_profile, bryant_tail_profile,
                       drift_coefficients, mean_curvature, eta_coefficient,
                       ap_certificate, flow_map, flow_derivative_check)
from .radial import RadialSolution, indicial_root, solve_radial, \
    monotonicity_check, lg_exponent_check
from .frequency import (ModeField, FrequencyTrace, separable_field, add,
                        constant_field, trace, level_inner,
                        orthogonality_angle, separation_defect,
                        frequency_ode_residual, i_log_derivative_check,
                        pinching_report, mean_value_ratio, deflate_constant)

__all__ = [
    "Spectrum", "sphere_spectrum", "torus_spectrum", "dimension_count",
    "APProfile", "model_profile", "bryant_tail_profile", "drift_coefficients",
    "mean_curvature", "eta_coefficient", "ap_certificate", "flow_map",
    "flow_derivative_check",
    "RadialSolution", "indicial_root", "solve_radial", "monotonicity_check",
    "lg_exponent_check",
    "ModeField", "FrequencyTrace", "separable_field", "add", "constant_field",
    "trace", "level_inner", "orthogonality_angle", "separation_defect",
    "frequency_ode_residual", "i_log_derivative_check", "pinching_report",
    "mean_value_ratio", "deflate_constant",
]

__version__ = "0.1.0"
