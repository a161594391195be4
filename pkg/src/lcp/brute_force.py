"""
Exhaustive LCP oracle over complementary supports
"""
import itertools
import logging
from typing import Iterator, List, Optional, Tuple

import numpy as np
from scipy.optimize import linprog

from utils.errors import DimensionError
from .problem import LcpProblem, LcpSolution, solution_from_z

logger = logging.getLogger(__name__)

BRUTE_FORCE_CAP = 16


def iter_supports(d: int) -> Iterator[Tuple[int, ...]]:
    """All subsets of range(d), by size and then lexicographically"""
    for size in range(d + 1):
        yield from itertools.combinations(range(d), size)


def solve_on_support(problem: LcpProblem, support: Tuple[int, ...], tol: float = 1e-9) -> Optional[np.ndarray]:
    """
    Complementary solution with z zero off the support and w zero on it

    Args:
        problem: LCP instance
        support: Indices allowed to carry nonzero z
        tol: Sign tolerance, scaled by max(1, |q|_inf)

    Returns:
        z, or None when the support admits no feasible point
    """
    d = problem.dim
    M, q = problem.M, problem.q
    scale = max(1.0, float(np.max(np.abs(q)))) if d else 1.0
    S = list(support)
    N = [i for i in range(d) if i not in support]
    z = np.zeros(d)

    if S:
        M_ss = M[np.ix_(S, S)]
        rhs = -q[S]
        if np.linalg.matrix_rank(M_ss) == len(S):
            z[S] = np.linalg.solve(M_ss, rhs)
        else:
            z_s = _singular_support(M, q, S, N)
            if z_s is None:
                return None
            z[S] = z_s

    if np.any(z < -tol * scale):
        return None
    z = np.maximum(z, 0.0)
    w = M @ z + q
    if N and np.min(w[N]) < -tol * scale:
        return None
    if S and np.max(np.abs(w[S])) > tol * scale * 10:
        return None
    return z


def _singular_support(M: np.ndarray, q: np.ndarray, S: List[int], N: List[int]) -> Optional[np.ndarray]:
    """Feasible point of M_SS z = -q_S, z >= 0, M_NS z + q_N >= 0 by LP"""
    M_ss = M[np.ix_(S, S)]
    z_ls, *_ = np.linalg.lstsq(M_ss, -q[S], rcond=None)
    if np.linalg.norm(M_ss @ z_ls + q[S]) > 1e-9 * max(1.0, float(np.linalg.norm(q[S]))):
        return None

    kwargs = {}
    if N:
        kwargs = {"A_ub": -M[np.ix_(N, S)], "b_ub": q[N]}
    result = linprog(
        c=np.zeros(len(S)),
        A_eq=M_ss,
        b_eq=-q[S],
        bounds=[(0, None)] * len(S),
        method="highs",
        **kwargs,
    )
    if result.status != 0:
        return None
    return result.x


def brute_force_lcp(problem: LcpProblem, tol: float = 1e-9) -> LcpSolution:
    """
    First feasible complementary solution in support order

    Args:
        problem: LCP instance of dimension at most BRUTE_FORCE_CAP
        tol: Sign tolerance

    Returns:
        LcpSolution, status solved or infeasible
    """
    d = problem.dim
    if d > BRUTE_FORCE_CAP:
        raise DimensionError(f"Brute-force LCP capped at dimension {BRUTE_FORCE_CAP}, got {d}")

    for support in iter_supports(d):
        z = solve_on_support(problem, support, tol)
        if z is not None:
            logger.debug(f"Brute force found support {support} for d={d}")
            return solution_from_z(problem, z)

    return solution_from_z(
        problem, np.zeros(d), status="infeasible",
        error=f"none of the {2 ** d} complementary supports is feasible",
    )


def enumerate_lcp_solutions(problem: LcpProblem, tol: float = 1e-9) -> List[np.ndarray]:
    """One feasible point per feasible support (the whole solution set when it is finite)"""
    d = problem.dim
    if d > BRUTE_FORCE_CAP:
        raise DimensionError(f"Brute-force LCP capped at dimension {BRUTE_FORCE_CAP}, got {d}")
    solutions = []
    for support in iter_supports(d):
        z = solve_on_support(problem, support, tol)
        if z is not None and not any(np.allclose(z, other, atol=1e-10) for other in solutions):
            solutions.append(z)
    return solutions
