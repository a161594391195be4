"""Output regulation: regulator equations, passivity synthesis, closed loops and Lyapunov checks"""
from .compensator import (
    ClosedLoop,
    CompensatorWeights,
    build_compensator,
    build_static_loop,
    compensator_weights,
    observer_data,
)
from .design import (
    FeedforwardMatch,
    RegulatorDesign,
    RegulatorSolution,
    feedforward_match,
    regulator_residual,
    solve_regulator_equations,
    static_control,
)
from .lyapunov import (
    ErrorTrajectory,
    LyapunovVerdict,
    error_trajectory,
    lyapunov_decrease_check,
    lyapunov_values,
    lyapunov_weight,
    max_cross_term,
    monotonicity_cross_terms,
)
from .passivity import (
    GainSynthesisResult,
    bisect_gamma,
    check_strict_passivity,
    find_observer_gain,
    find_passifying_gain,
    passivity_lmi,
    stacked_quadruple,
)
from .viability import viability_control, viability_input_matrix

__all__ = [
    "ClosedLoop",
    "CompensatorWeights",
    "build_compensator",
    "build_static_loop",
    "compensator_weights",
    "observer_data",
    "FeedforwardMatch",
    "RegulatorDesign",
    "RegulatorSolution",
    "feedforward_match",
    "regulator_residual",
    "solve_regulator_equations",
    "static_control",
    "ErrorTrajectory",
    "LyapunovVerdict",
    "error_trajectory",
    "lyapunov_decrease_check",
    "lyapunov_values",
    "lyapunov_weight",
    "max_cross_term",
    "monotonicity_cross_terms",
    "GainSynthesisResult",
    "bisect_gamma",
    "check_strict_passivity",
    "find_observer_gain",
    "find_passifying_gain",
    "passivity_lmi",
    "stacked_quadruple",
    "viability_control",
    "viability_input_matrix",
]
