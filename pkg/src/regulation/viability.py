"""
Viability input keeping H x + h(t) inside K

On the active faces a of K the input u_eta = N_a^T alpha, N_a = R_a H B, with

    0 <= alpha ⟂ N_a N_a^T alpha + R_a (H x_dot_free + h_dot) >= 0

so that the active face values do not decrease.
"""
import logging
from typing import Optional

import numpy as np

from integrator import EviSystem
from lcp import BRUTE_FORCE_CAP, LcpProblem, brute_force_lcp, lemke_solve
from utils.errors import ComplementarityError, DimensionError

logger = logging.getLogger(__name__)

SOLVABILITY_NOTE = "the active block of H B is not positive definite, so this LCP need not be solvable"


def viability_input_matrix(B: np.ndarray, H: np.ndarray) -> np.ndarray:
    """G = B (H B)^T, the multiplier channel that realizes u_eta = (H B)^T eta"""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    return B @ (H @ B).T


def viability_control(
    system: EviSystem,
    x: np.ndarray,
    u_reg: np.ndarray,
    x_r: Optional[np.ndarray],
    t: float,
    act_tol: float = 1e-6,
    tol: float = 1e-9
) -> np.ndarray:
    """
    Smallest-correction input keeping the constraint viable at (t, x)

    Args:
        system: Plant (uses A, B, F, B_ext/f_ext, H and the moving set)
        x: Plant state with H x + h(t) in K
        u_reg: Regulating input
        x_r: Exosystem state entering through F (ignored when F is None)
        t: Time
        act_tol: Face values below this (relative) count as active
        tol: LCP tolerance

    Returns:
        u_eta (zero when no face is active)

    Raises:
        ComplementarityError: the active-face LCP has no solution
    """
    if system.B is None:
        raise DimensionError(f"System {system.name} has no input matrix B")
    x = np.asarray(x, dtype=float)
    u_reg = np.atleast_1d(np.asarray(u_reg, dtype=float))
    d_u = system.B.shape[1]

    R = system.moving_set.cone.face_form()
    y = system.H @ x + system.moving_set.h(t)
    faces = R @ y
    scale = max(1.0, float(np.max(np.abs(y))))
    active = np.flatnonzero(faces <= act_tol * scale)
    if len(active) == 0:
        return np.zeros(d_u)

    x_dot = system.A @ x + system.B @ u_reg
    if system.F is not None and x_r is not None:
        x_dot = x_dot + system.F @ np.asarray(x_r, dtype=float)
    if system.B_ext is not None and system.f_ext is not None:
        x_dot = x_dot + system.B_ext @ system.f_ext(t)

    R_a = R[active]
    N_a = R_a @ system.H @ system.B
    y_dot_free = R_a @ (system.H @ x_dot + system.moving_set.hdot(t))

    problem = LcpProblem(N_a @ N_a.T, y_dot_free)
    solution = lemke_solve(problem, tol=tol)
    if not solution.solved and problem.dim <= BRUTE_FORCE_CAP:
        solution = brute_force_lcp(problem, tol=tol)
    if not solution.solved:
        raise ComplementarityError(
            f"viability LCP on faces {active.tolist()} failed at t={t}: {solution.error}",
            status=solution.status,
            hint=SOLVABILITY_NOTE,
        )

    u_eta = N_a.T @ solution.z
    logger.debug(f"Viability input at t={t:.6g} on faces {active.tolist()}: {u_eta}")
    return u_eta
