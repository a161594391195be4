"""EVI time stepping, jump map and well-posedness checks"""
from .assumptions import AssumptionCheck, AssumptionReport, check_assumptions
from .export import trajectory_header, write_trajectory_csv
from .stepping import (
    JumpOutcome,
    StepOperator,
    jump_map,
    lipschitz_estimate,
    prepare_step,
    ramp_jump_oracle,
    resolve_jump,
    simulate,
    step,
)
from .system import EviSystem, JumpRecord, Trajectory

__all__ = [
    "AssumptionCheck",
    "AssumptionReport",
    "check_assumptions",
    "trajectory_header",
    "write_trajectory_csv",
    "JumpOutcome",
    "StepOperator",
    "jump_map",
    "lipschitz_estimate",
    "prepare_step",
    "ramp_jump_oracle",
    "resolve_jump",
    "simulate",
    "step",
    "EviSystem",
    "JumpRecord",
    "Trajectory",
]
