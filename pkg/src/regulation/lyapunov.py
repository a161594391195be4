"""
Lyapunov decrease and monotonicity checks along closed-loop trajectories
"""
import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import block_diag

from integrator import Trajectory
from utils.errors import DimensionError

logger = logging.getLogger(__name__)

LYAPUNOV_TOL = 1e-6


@dataclass
class ErrorTrajectory:
    """
    Regulation error e = E X sampled on the trajectory grid

    jumps holds (t, e-, e+) for every recorded state jump.
    """
    times: np.ndarray
    errors: np.ndarray
    jump_flags: np.ndarray
    jumps: List[Tuple[float, np.ndarray, np.ndarray]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.times)


class LyapunovVerdict(NamedTuple):
    monotone: bool
    worst_increase: float
    jump_violations: int
    values: np.ndarray


def error_trajectory(traj: Trajectory, selector: np.ndarray) -> ErrorTrajectory:
    """Map a closed-loop trajectory to its error coordinates"""
    E = np.atleast_2d(np.asarray(selector, dtype=float))
    if E.shape[1] != traj.n:
        raise DimensionError(f"Error selector has {E.shape[1]} columns, trajectory states have {traj.n}")
    return ErrorTrajectory(
        times=traj.times,
        errors=traj.states @ E.T,
        jump_flags=traj.jump_flags.copy(),
        jumps=[(j.t, E @ j.x_minus, E @ j.x_plus) for j in traj.jumps],
    )


def lyapunov_values(errors: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """V(e) = e' W e for each row of errors"""
    errors = np.atleast_2d(errors)
    return np.einsum("ki,ij,kj->k", errors, weight, errors)


def lyapunov_weight(P_blocks: Sequence[np.ndarray], alpha: float = 1.0, beta: float = 1.0) -> np.ndarray:
    """alpha P for one block, blkdiag(alpha P, beta P_hat) for two"""
    blocks = [np.atleast_2d(np.asarray(P, dtype=float)) for P in P_blocks]
    if len(blocks) == 1:
        return alpha * blocks[0]
    if len(blocks) == 2:
        return block_diag(alpha * blocks[0], beta * blocks[1])
    raise DimensionError(f"Expected one or two certificate blocks, got {len(blocks)}")


def lyapunov_decrease_check(
    err: ErrorTrajectory,
    P_blocks: Sequence[np.ndarray],
    alpha: float = 1.0,
    beta: float = 1.0,
    tol: float = LYAPUNOV_TOL,
    jump_tol: Optional[float] = None
) -> LyapunovVerdict:
    """
    Check that V(e) does not increase along the samples and across jumps

    Increments are compared against tol * max(1, V(e(t0))); every recorded jump
    must also satisfy V(e+) <= V(e-) within jump_tol (defaults to tol).

    Args:
        err: Error trajectory
        P_blocks: [P] or [P, P_hat]
        alpha, beta: Block weights
        tol: Allowed increase per step
        jump_tol: Allowed increase across a jump

    Returns:
        LyapunovVerdict(monotone, worst_increase, jump_violations, values)
    """
    weight = lyapunov_weight(P_blocks, alpha, beta)
    if weight.shape[0] != err.errors.shape[1]:
        raise DimensionError(f"Weight is {weight.shape}, errors have {err.errors.shape[1]} components")
    jump_tol = tol if jump_tol is None else jump_tol

    values = lyapunov_values(err.errors, weight)
    scale = max(1.0, float(values[0])) if len(values) else 1.0
    increments = np.diff(values)
    worst = max(0.0, float(np.max(increments))) if len(increments) else 0.0
    monotone = worst <= tol * scale

    jump_violations = 0
    for t, e_minus, e_plus in err.jumps:
        v_minus = float(e_minus @ weight @ e_minus)
        v_plus = float(e_plus @ weight @ e_plus)
        if v_plus - v_minus > jump_tol * scale:
            jump_violations += 1
            logger.warning(f"V increases across the jump at t={t:.10g}: {v_minus:.6g} -> {v_plus:.6g}")
        worst = max(worst, v_plus - v_minus)

    monotone = monotone and jump_violations == 0
    if not monotone:
        k = int(np.argmax(increments)) if len(increments) else 0
        logger.warning(f"V is not monotone: worst increase {worst:.3e} (largest step increase at t={err.times[k + 1]:.6g})")
    return LyapunovVerdict(monotone=monotone, worst_increase=worst, jump_violations=jump_violations, values=values)


def monotonicity_cross_terms(
    multipliers: np.ndarray,
    constraint_values: np.ndarray,
    first: slice,
    second: slice
) -> np.ndarray:
    """
    <eta_1 - eta_2, v_1 - v_2> per sample for two equally sized constraint blocks

    Both blocks satisfy their own cone complementarity, so every entry is <= 0
    up to the solver tolerance.
    """
    eta_1, eta_2 = multipliers[:, first], multipliers[:, second]
    v_1, v_2 = constraint_values[:, first], constraint_values[:, second]
    if eta_1.shape != eta_2.shape:
        raise DimensionError(f"Constraint blocks differ in size: {eta_1.shape[1]} vs {eta_2.shape[1]}")
    return np.einsum("ki,ki->k", eta_1 - eta_2, v_1 - v_2)


def max_cross_term(traj: Trajectory, blocks: dict, pairs: Sequence[Tuple[str, str]]) -> float:
    """Largest cross term over all samples and block pairs"""
    worst = -np.inf
    for a, b in pairs:
        terms = monotonicity_cross_terms(traj.multipliers, traj.constraint_values, blocks[a], blocks[b])
        worst = max(worst, float(np.max(terms)))
    return worst
