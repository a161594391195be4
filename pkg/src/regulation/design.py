"""
Regulator equations, feedforward matching and the static control law

    Pi A_r = A Pi + B M + F,   C_r = C Pi,   H_r = H Pi
    u = K x + (M - K Pi) x_r (+ N f_ext)
"""
import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from utils.errors import DimensionError

logger = logging.getLogger(__name__)

REGULATOR_TOL = 1e-10


@dataclass
class RegulatorDesign:
    """
    Static (and optionally dynamic) regulator data

    Args:
        Pi: n x d_r embedding of exosystem states
        M_ff: d_u x d_r feedforward matrix
        K: d_u x n state-feedback gain
        P: n x n certificate for the closed loop (A + BK, G, H, J)
        gamma: Dissipation rate of P
        L: Optional (n + d_r) x d_w injection gain of the compensator
        P_hat, gamma_hat: Optional observer certificate
        N: Optional d_u x d_e external-forcing feedforward
        residual: Relative residual of the regulator equations
        margin: Passivity margin reported with the design
    """
    Pi: np.ndarray
    M_ff: np.ndarray
    K: np.ndarray
    P: np.ndarray
    gamma: float
    L: Optional[np.ndarray] = None
    P_hat: Optional[np.ndarray] = None
    gamma_hat: Optional[float] = None
    N: Optional[np.ndarray] = None
    residual: float = 0.0
    margin: float = 0.0

    def __post_init__(self):
        self.Pi = np.atleast_2d(np.asarray(self.Pi, dtype=float))
        self.M_ff = np.atleast_2d(np.asarray(self.M_ff, dtype=float))
        self.K = np.atleast_2d(np.asarray(self.K, dtype=float))
        self.P = np.atleast_2d(np.asarray(self.P, dtype=float))
        for name in ("L", "P_hat", "N"):
            value = getattr(self, name)
            if value is not None:
                setattr(self, name, np.atleast_2d(np.asarray(value, dtype=float)))

        n, d_r = self.Pi.shape
        d_u = self.K.shape[0]
        if self.K.shape != (d_u, n) or self.M_ff.shape != (d_u, d_r):
            raise DimensionError(
                f"Design shapes disagree: Pi {self.Pi.shape}, M {self.M_ff.shape}, K {self.K.shape}"
            )
        if self.P.shape != (n, n):
            raise DimensionError(f"P must be {n}x{n}, got {self.P.shape}")

    @property
    def has_observer(self) -> bool:
        return self.L is not None

    @property
    def reference_gain(self) -> np.ndarray:
        """M - K Pi"""
        return self.M_ff - self.K @ self.Pi


class RegulatorSolution(NamedTuple):
    Pi: np.ndarray
    M_ff: np.ndarray
    residual: float
    solvable: bool


def regulator_residual(A, B, F, A_r, C, C_r, H, H_r, Pi, M_ff) -> float:
    """|Pi A_r - A Pi - B M - F| + |C_r - C Pi| + |H_r - H Pi|, relative to the data size"""
    F = np.zeros_like(Pi) if F is None else F
    dynamic = Pi @ A_r - A @ Pi - B @ M_ff - F
    output = C_r - C @ Pi
    constraint = H_r - H @ Pi
    scale = max(1.0, *(float(np.linalg.norm(m)) for m in (A, B, A_r, C, H)))
    total = float(np.linalg.norm(dynamic) + np.linalg.norm(output) + np.linalg.norm(constraint))
    return total / scale


def solve_regulator_equations(
    A: np.ndarray,
    B: np.ndarray,
    F: Optional[np.ndarray],
    A_r: np.ndarray,
    C: np.ndarray,
    C_r: np.ndarray,
    H: np.ndarray,
    H_r: np.ndarray,
    tol: float = REGULATOR_TOL
) -> RegulatorSolution:
    """
    Minimum-norm least-squares solution of the regulator equations

    The three matrix equations are stacked into one linear system in
    (vec Pi, vec M) with column-major vec, vec(X Y Z) = (Z^T ⊗ X) vec Y.

    Args:
        A, B, F: Plant drift, input and exogenous coupling (F may be None)
        A_r: Exosystem drift
        C, C_r: Regulation outputs
        H, H_r: Constraint outputs
        tol: Relative residual above which the equations are flagged unsolvable

    Returns:
        RegulatorSolution(Pi, M_ff, residual, solvable)
    """
    A, B, A_r, C, C_r, H, H_r = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (A, B, A_r, C, C_r, H, H_r))
    n = A.shape[0]
    d_r = A_r.shape[0]
    d_u = B.shape[1]
    F = np.zeros((n, d_r)) if F is None else np.atleast_2d(np.asarray(F, dtype=float))

    if B.shape[0] != n or F.shape != (n, d_r) or C.shape[1] != n or H.shape[1] != n:
        raise DimensionError("Plant matrices disagree on the state dimension")
    if C_r.shape != (C.shape[0], d_r) or H_r.shape != (H.shape[0], d_r):
        raise DimensionError("Exosystem output matrices disagree with the plant outputs")

    I_n = np.eye(n)
    I_r = np.eye(d_r)
    # vec(Pi A_r - A Pi) and vec(B M)
    dyn_pi = np.kron(A_r.T, I_n) - np.kron(I_r, A)
    dyn_m = -np.kron(I_r, B)
    rows = [
        np.hstack([dyn_pi, dyn_m]),
        np.hstack([np.kron(I_r, C), np.zeros((C.shape[0] * d_r, d_u * d_r))]),
        np.hstack([np.kron(I_r, H), np.zeros((H.shape[0] * d_r, d_u * d_r))]),
    ]
    system = np.vstack(rows)
    rhs = np.concatenate([F.flatten(order="F"), C_r.flatten(order="F"), H_r.flatten(order="F")])

    # row equilibration leaves the consistent solution set unchanged
    row_norms = np.linalg.norm(system, axis=1)
    row_norms[row_norms == 0] = 1.0
    solution, *_ = np.linalg.lstsq(system / row_norms[:, None], rhs / row_norms, rcond=None)

    Pi = solution[:n * d_r].reshape((n, d_r), order="F")
    M_ff = solution[n * d_r:].reshape((d_u, d_r), order="F")
    residual = regulator_residual(A, B, F, A_r, C, C_r, H, H_r, Pi, M_ff)
    solvable = residual <= tol

    if solvable:
        logger.info(f"Regulator equations solved (relative residual {residual:.3e})")
    else:
        logger.warning(f"Regulator equations unsolvable: relative residual {residual:.3e} > {tol:g}")
    return RegulatorSolution(Pi=Pi, M_ff=M_ff, residual=residual, solvable=solvable)


class FeedforwardMatch(NamedTuple):
    N: np.ndarray
    residual: float
    feasible: bool


def feedforward_match(
    B: np.ndarray,
    B_ext: np.ndarray,
    Pi: np.ndarray,
    B_r: np.ndarray,
    tol: float = 1e-9
) -> FeedforwardMatch:
    """
    Least-squares N with B N + B_ext = Pi B_r

    Returns:
        FeedforwardMatch(N, relative residual, feasible)
    """
    B, B_ext, Pi, B_r = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (B, B_ext, Pi, B_r))
    target = Pi @ B_r - B_ext
    if target.shape[0] != B.shape[0]:
        raise DimensionError(f"B has {B.shape[0]} rows, Pi B_r - B_ext has {target.shape[0]}")

    N, *_ = np.linalg.lstsq(B, target, rcond=None)
    scale = max(1.0, float(np.linalg.norm(B_ext)), float(np.linalg.norm(Pi @ B_r)))
    residual = float(np.linalg.norm(B @ N + B_ext - Pi @ B_r)) / scale
    feasible = residual <= tol
    if not feasible:
        logger.warning(f"No feedforward N matches the external forcing (residual {residual:.3e})")
    return FeedforwardMatch(N=N, residual=residual, feasible=feasible)


def static_control(
    design: RegulatorDesign,
    x: np.ndarray,
    x_r: np.ndarray,
    f_ext: Optional[np.ndarray] = None
) -> np.ndarray:
    """u = K x + (M - K Pi) x_r, plus N f_ext when the design carries N"""
    u = design.K @ np.asarray(x, dtype=float) + design.reference_gain @ np.asarray(x_r, dtype=float)
    if design.N is not None and f_ext is not None:
        u = u + design.N @ np.atleast_1d(np.asarray(f_ext, dtype=float))
    return u
