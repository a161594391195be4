"""
Cone complementarity K ∋ M eta + q ⟂ eta ∈ K* reduced to a standard LCP

With K = {y : R y >= 0} we have K* = cone(R^T), so substituting eta = R^T alpha
gives 0 <= alpha ⟂ R M R^T alpha + R q >= 0.
"""
import logging
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from geometry import ConeCpInstance, PolyhedralCone
from utils.errors import AssumptionViolation, ComplementarityError
from .brute_force import BRUTE_FORCE_CAP, brute_force_lcp
from .lemke import lemke_solve
from .problem import LcpProblem, LcpSolution

logger = logging.getLogger(__name__)

Method = Literal["auto", "lemke", "brute_force"]

# eigenvalues of J + J^T below this (relative) split range from kernel
RANGE_CUTOFF = 1e-10

ASSUMPTION_HINT = "constraint qualification or range condition likely fails"


@dataclass
class ConeCpResult:
    """Multiplier eta, cone-side value y = M eta + q and the solve diagnostics"""
    eta: np.ndarray
    y: np.ndarray
    status: str
    residual: float
    method: str
    pivots: int = 0
    error: Optional[str] = None

    @property
    def solved(self) -> bool:
        return self.status == "solved"


def reduce_to_lcp(cone: PolyhedralCone, M: np.ndarray, q: np.ndarray) -> LcpProblem:
    """Standard LCP in alpha for the cone CP with data (K, M, q)"""
    R = cone.face_form()
    if cone.is_orthant:
        return LcpProblem(M, q)
    return LcpProblem(R @ M @ R.T, R @ q)


def cone_cp_residual(cone: PolyhedralCone, M: np.ndarray, q: np.ndarray, eta: np.ndarray) -> float:
    """max(primal, dual, complementarity) violation of eta for the data (K, M, q)"""
    y = M @ eta + q
    return max(cone.primal_violation(y), cone.dual_violation(eta), abs(float(eta @ y)))


def _run(problem: LcpProblem, method: str, tol: float) -> LcpSolution:
    if method == "lemke":
        return lemke_solve(problem, tol=tol)
    return brute_force_lcp(problem, tol=tol)


def solve_cone_lcp(
    cone: PolyhedralCone,
    M: np.ndarray,
    q: np.ndarray,
    method: Method = "auto",
    tol: float = 1e-9
) -> ConeCpResult:
    """
    Solve K ∋ M eta + q ⟂ eta ∈ K*

    Args:
        cone: K in face form (generator-only cones are converted)
        M: d x d matrix
        q: Vector in R^d
        method: lemke, brute_force, or auto (Lemke, then brute force on failure)
        tol: Residual tolerance scaled by max(1, |q|_inf)

    Returns:
        ConeCpResult (never raises for unsolvable instances)
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    d = cone.dim
    scale = max(1.0, float(np.max(np.abs(q)))) if d else 1.0

    R = cone.face_form()
    if R.shape[0] == 0:
        # K = R^d, K* = {0}
        return ConeCpResult(eta=np.zeros(d), y=q.copy(), status="solved", residual=0.0, method="trivial")
    if cone.contains(q, tol * scale):
        # eta = 0 is complementary to any q in K
        return ConeCpResult(
            eta=np.zeros(d), y=q.copy(), status="solved",
            residual=cone.primal_violation(q), method="inactive",
        )

    problem = reduce_to_lcp(cone, M, q)
    if method == "auto":
        order = ["lemke"]
        if problem.dim <= BRUTE_FORCE_CAP:
            order.append("brute_force")
    else:
        order = [method]

    result = None
    for name in order:
        solution = _run(problem, name, tol)
        eta = solution.z if cone.is_orthant else R.T @ solution.z
        y = M @ eta + q
        residual = cone_cp_residual(cone, M, q, eta) if solution.solved else float("inf")
        status = solution.status
        if solution.solved and residual > tol * scale:
            status = "infeasible"
        result = ConeCpResult(
            eta=eta,
            y=y,
            status=status,
            residual=residual,
            method=name,
            pivots=solution.pivots,
            error=solution.error if status != "solved" else None,
        )
        if result.solved:
            return result
        logger.warning(f"Cone CP via {name} ended with status {status}: {result.error}")

    return result


def solve_cone_cp(
    inst: ConeCpInstance,
    x: np.ndarray,
    t: float,
    method: Method = "auto",
    tol: float = 1e-9
) -> np.ndarray:
    """
    Multiplier eta with K ∋ Hx + J eta + h(t) ⟂ eta ∈ K*

    Args:
        inst: Cone CP data (H, J, moving set)
        x: State
        t: Time at which h is evaluated
        method: Solver choice, see solve_cone_lcp
        tol: Residual tolerance

    Returns:
        eta

    Raises:
        ComplementarityError: when no solution is found
    """
    q = inst.H @ np.asarray(x, dtype=float) + inst.moving_set.h(t)
    result = solve_cone_lcp(inst.cone, inst.J, q, method=method, tol=tol)
    if not result.solved:
        raise ComplementarityError(
            f"Cone CP unsolvable at t={t}: {result.error}",
            status=result.status,
            hint=ASSUMPTION_HINT,
        )
    return result.eta


def range_projector(J: np.ndarray, cutoff: float = RANGE_CUTOFF) -> np.ndarray:
    """Orthogonal projector onto range(J + J^T) from its eigendecomposition"""
    S = np.asarray(J, dtype=float) + np.asarray(J, dtype=float).T
    if S.size == 0:
        return np.zeros_like(S)
    eigvals, eigvecs = np.linalg.eigh(S)
    scale = max(1.0, float(np.max(np.abs(eigvals))))
    U = eigvecs[:, np.abs(eigvals) > cutoff * scale]
    return U @ U.T


def kernel_basis(J: np.ndarray, cutoff: float = RANGE_CUTOFF) -> np.ndarray:
    """Orthonormal basis of ker(J + J^T), same cutoff as range_projector"""
    S = np.asarray(J, dtype=float) + np.asarray(J, dtype=float).T
    eigvals, eigvecs = np.linalg.eigh(S)
    scale = max(1.0, float(np.max(np.abs(eigvals)))) if eigvals.size else 1.0
    return eigvecs[:, np.abs(eigvals) <= cutoff * scale]


def least_norm_eta(
    inst: ConeCpInstance,
    x: np.ndarray,
    t: float,
    method: Method = "auto",
    tol: float = 1e-9
) -> np.ndarray:
    """
    Least-norm multiplier: any solution projected onto range(J + J^T)

    Every solution shares the same range component, so the projection does not
    depend on which solution the solver returns.

    Raises:
        ComplementarityError: when the cone CP has no solution
        AssumptionViolation: when the projected multiplier is itself not a solution (A4)
    """
    eta = solve_cone_cp(inst, x, t, method=method, tol=tol)
    lam = range_projector(inst.J) @ eta

    q = inst.H @ np.asarray(x, dtype=float) + inst.moving_set.h(t)
    scale = max(1.0, float(np.max(np.abs(q))))
    residual = cone_cp_residual(inst.cone, inst.J, q, lam)
    if residual > tol * scale * 10:
        raise AssumptionViolation(
            f"least-norm multiplier fails the cone CP at t={t} (residual {residual:.3e})",
            assumption="A4",
        )
    return lam
