"""Polyhedral cones, moving sets, offset signals and projections"""
from .cones import (
    DEFAULT_TOL,
    FACE_ENUM_CAP,
    PolyhedralCone,
    cone_generators,
    dual_cone,
    normal_cone_residual,
)
from .moving_set import ConeCpInstance, MovingSet
from .projection import (
    distance_to_cone,
    fit_hausdorff_constant,
    hausdorff_estimate,
    project_onto_cone,
    project_onto_set,
    translate_hausdorff,
)
from .signals import (
    ConstantSignal,
    ExpressionSignal,
    PiecewiseLinearSignal,
    Signal,
    StackedSignal,
    StaircaseSignal,
    Term,
    signal_from_dict,
    stack_signals,
)

__all__ = [
    "DEFAULT_TOL",
    "FACE_ENUM_CAP",
    "PolyhedralCone",
    "cone_generators",
    "dual_cone",
    "normal_cone_residual",
    "ConeCpInstance",
    "MovingSet",
    "distance_to_cone",
    "fit_hausdorff_constant",
    "hausdorff_estimate",
    "project_onto_cone",
    "project_onto_set",
    "translate_hausdorff",
    "ConstantSignal",
    "ExpressionSignal",
    "PiecewiseLinearSignal",
    "Signal",
    "StackedSignal",
    "StaircaseSignal",
    "Term",
    "signal_from_dict",
    "stack_signals",
]
