"""Linear and cone complementarity solvers"""
from .brute_force import BRUTE_FORCE_CAP, brute_force_lcp, enumerate_lcp_solutions, iter_supports, solve_on_support
from .cone_cp import (
    ConeCpResult,
    cone_cp_residual,
    kernel_basis,
    least_norm_eta,
    range_projector,
    reduce_to_lcp,
    solve_cone_cp,
    solve_cone_lcp,
)
from .lemke import lemke_solve
from .problem import (
    LcpProblem,
    LcpSolution,
    complementarity_residual,
    format_lcp,
    parse_lcp,
    read_lcp,
    solution_from_z,
    write_lcp,
)

__all__ = [
    "BRUTE_FORCE_CAP",
    "brute_force_lcp",
    "enumerate_lcp_solutions",
    "iter_supports",
    "solve_on_support",
    "ConeCpResult",
    "cone_cp_residual",
    "kernel_basis",
    "least_norm_eta",
    "range_projector",
    "reduce_to_lcp",
    "solve_cone_cp",
    "solve_cone_lcp",
    "lemke_solve",
    "LcpProblem",
    "LcpSolution",
    "complementarity_residual",
    "format_lcp",
    "parse_lcp",
    "read_lcp",
    "solution_from_z",
    "write_lcp",
]
