"""Utility modules"""
from .errors import (
    EviError,
    DimensionError,
    InfeasibleSetError,
    ComplementarityError,
    AssumptionViolation,
    StepSizeError,
    SimulationError,
    ScenarioValidationError,
)
from .settings import Settings
from .textio import format_float, write_csv, matrix_to_lists

__all__ = [
    "EviError",
    "DimensionError",
    "InfeasibleSetError",
    "ComplementarityError",
    "AssumptionViolation",
    "StepSizeError",
    "SimulationError",
    "ScenarioValidationError",
    "Settings",
    "format_float",
    "write_csv",
    "matrix_to_lists",
]
