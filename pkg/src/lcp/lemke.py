"""
Lemke's complementary pivoting with a lexicographic ratio test
"""
import logging
from typing import Optional

import numpy as np

from .problem import LcpProblem, LcpSolution, complementarity_residual, solution_from_z

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-12


def _lexicographic_leaving(tableau: np.ndarray, col: np.ndarray, d: int, candidates: np.ndarray) -> int:
    """
    Row index minimizing (b_i, B^-1_i) / a_i lexicographically over the candidate rows

    B^-1 sits in the first d columns of the tableau because the initial basis
    is the identity on w.
    """
    rows = candidates
    keys = np.column_stack([tableau[rows, -1], tableau[rows, :d]]) / col[rows, None]
    for k in range(keys.shape[1]):
        column = keys[:, k]
        best = column.min()
        keep = column <= best + PIVOT_TOL * max(1.0, abs(best))
        rows, keys = rows[keep], keys[keep]
        if len(rows) == 1:
            break
    return int(rows[0])


def _pivot(tableau: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])


def _polish(problem: LcpProblem, z: np.ndarray) -> np.ndarray:
    """Re-solve the principal system on the support, keeping the result if it is better"""
    support = np.flatnonzero(z > 0)
    if len(support) == 0:
        return z
    sub = problem.M[np.ix_(support, support)]
    try:
        z_s = np.linalg.solve(sub, -problem.q[support])
    except np.linalg.LinAlgError:
        return z
    if np.any(z_s < 0):
        return z
    refined = np.zeros_like(z)
    refined[support] = z_s
    if problem.residual(refined) <= problem.residual(z):
        return refined
    return z


def lemke_solve(
    problem: LcpProblem,
    covering: Optional[np.ndarray] = None,
    tol: float = 1e-9,
    max_pivots: Optional[int] = None
) -> LcpSolution:
    """
    Solve 0 <= z ⟂ Mz + q >= 0 by Lemke's method

    Args:
        problem: LCP instance
        covering: Positive covering vector (all ones by default)
        tol: Certificate tolerance, scaled by max(1, |q|_inf)
        max_pivots: Pivot limit (defaults to d * 2^d)

    Returns:
        LcpSolution with status solved, ray_termination or infeasible
    """
    d = problem.dim
    if not problem.is_finite:
        raise ValueError("LCP data must be finite")

    q = problem.q
    if d == 0 or np.all(q >= 0):
        return solution_from_z(problem, np.zeros(d))

    cover = np.ones(d) if covering is None else np.asarray(covering, dtype=float)
    if cover.shape != (d,) or np.any(cover <= 0):
        raise ValueError("Covering vector must be positive with one entry per row")

    limit = max_pivots if max_pivots is not None else d * 2 ** d
    scale = max(1.0, float(np.max(np.abs(q))))

    # columns: w (0..d-1), z (d..2d-1), z0 (2d), rhs
    tableau = np.hstack([np.eye(d), -problem.M, -cover[:, None], q[:, None]])
    basis = list(range(d))
    z0 = 2 * d

    # initial pivot: z0 enters, the most violated row leaves
    ratios = q / cover
    worst = ratios.min()
    tied = np.flatnonzero(ratios <= worst + PIVOT_TOL * max(1.0, abs(worst)))
    row = int(tied.max())
    _pivot(tableau, row, z0)
    leaving = basis[row]
    basis[row] = z0
    pivots = 1

    while True:
        entering = leaving + d if leaving < d else leaving - d
        col = tableau[:, entering]
        candidates = np.flatnonzero(col > PIVOT_TOL)
        if len(candidates) == 0:
            logger.warning(f"Lemke ray termination after {pivots} pivots (d={d})")
            z = _read_z(tableau, basis, d)
            return LcpSolution(
                z=z,
                w=problem.M @ z + q,
                status="ray_termination",
                complementarity_residual=complementarity_residual(z, problem.M @ z + q),
                pivots=pivots,
                error="secondary ray: no blocking variable for the entering column",
            )

        if pivots >= limit:
            logger.warning(f"Lemke pivot limit {limit} reached (d={d})")
            z = _read_z(tableau, basis, d)
            return solution_from_z(
                problem, z, status="infeasible", pivots=pivots,
                error=f"pivot limit {limit} reached, possible cycling",
            )

        z0_row = basis.index(z0)
        if z0_row in candidates:
            b = tableau[candidates, -1] / col[candidates]
            z0_ratio = tableau[z0_row, -1] / col[z0_row]
            if z0_ratio <= b.min() + PIVOT_TOL * max(1.0, abs(b.min())):
                row = z0_row
            else:
                row = _lexicographic_leaving(tableau, col, d, candidates)
        else:
            row = _lexicographic_leaving(tableau, col, d, candidates)

        _pivot(tableau, row, entering)
        leaving = basis[row]
        basis[row] = entering
        pivots += 1

        if leaving == z0:
            break

    z = _polish(problem, _read_z(tableau, basis, d))
    solution = solution_from_z(problem, z, pivots=pivots)
    if solution.complementarity_residual > tol * scale:
        logger.warning(
            f"Lemke terminated with residual {solution.complementarity_residual:.3e} above tolerance"
        )
        solution.status = "infeasible"
        solution.error = f"terminal basis fails the certificate (residual {solution.complementarity_residual:.3e})"
        return solution

    logger.debug(f"Lemke solved d={d} in {pivots} pivots")
    return solution


def _read_z(tableau: np.ndarray, basis: list, d: int) -> np.ndarray:
    z = np.zeros(d)
    for row, var in enumerate(basis):
        if d <= var < 2 * d:
            z[var - d] = max(tableau[row, -1], 0.0)
    return z
