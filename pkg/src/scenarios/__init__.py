"""Scenario library, file loading, runs, convergence studies and reports"""
from .library import BUILTIN_SCENARIOS, builtin_names, get_builtin
from .loader import (
    check_regulator_fields,
    design_file_dict,
    design_from_dict,
    design_to_dict,
    load_design_file,
    load_scenario,
    scenario_from_dict,
    synthesize_design,
    write_design_file,
)
from .model import ConvergenceTable, Scenario
from .report import format_report, format_table, parse_report, write_error_csv, write_report
from .runner import (
    DesignVerification,
    RunResult,
    convergence_study,
    run_many,
    run_scenario,
    verify_design,
    viability_feedback,
    viability_gap,
    viability_inputs,
    write_convergence_report,
)

__all__ = [
    "BUILTIN_SCENARIOS",
    "builtin_names",
    "get_builtin",
    "check_regulator_fields",
    "design_file_dict",
    "design_from_dict",
    "design_to_dict",
    "load_design_file",
    "load_scenario",
    "scenario_from_dict",
    "synthesize_design",
    "write_design_file",
    "ConvergenceTable",
    "Scenario",
    "format_report",
    "format_table",
    "parse_report",
    "write_error_csv",
    "write_report",
    "DesignVerification",
    "RunResult",
    "convergence_study",
    "run_many",
    "run_scenario",
    "verify_design",
    "viability_feedback",
    "viability_gap",
    "viability_inputs",
    "write_convergence_report",
]
