"""
Strict-passivity LMI checks and gain synthesis by alternating projections

A quadruple (A, G, H, J) is strictly passive with certificate (P, gamma) when

    [[A^T P + P A + gamma P,  P G - H^T   ],
     [G^T P - H,              -(J + J^T)  ]]  <= 0
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from lcp import kernel_basis
from utils.errors import DimensionError

logger = logging.getLogger(__name__)

GAMMA_BISECTIONS = 60
GAMMA_BACKOFF = 0.99


def _as2d(matrix) -> np.ndarray:
    return np.atleast_2d(np.asarray(matrix, dtype=float))


def passivity_lmi(A, G, H, J, P, gamma: float) -> np.ndarray:
    """The symmetric block matrix whose negative semidefiniteness certifies passivity"""
    A, G, H, J, P = (_as2d(m) for m in (A, G, H, J, P))
    n, d = G.shape
    if A.shape != (n, n) or H.shape != (d, n) or J.shape != (d, d) or P.shape != (n, n):
        raise DimensionError(
            f"Passivity data disagree: A {A.shape}, G {G.shape}, H {H.shape}, J {J.shape}, P {P.shape}"
        )
    top_left = A.T @ P + P @ A + gamma * P
    top_right = P @ G - H.T
    lmi = np.block([[top_left, top_right], [top_right.T, -(J + J.T)]])
    return (lmi + lmi.T) / 2


def check_strict_passivity(A, G, H, J, P, gamma: float, tol: float = 1e-9) -> Tuple[bool, float]:
    """
    Check the passivity LMI for a given certificate

    Args:
        A, G, H, J: The quadruple
        P: Symmetric certificate
        gamma: Dissipation rate, positive
        tol: Feasibility tolerance relative to max(1, |LMI|_2)

    Returns:
        (feasible, margin) with margin the largest eigenvalue of the LMI

    Raises:
        ValueError: P not symmetric or gamma not positive
    """
    P = _as2d(P)
    if np.linalg.norm(P - P.T) > 1e-12 * max(1.0, float(np.linalg.norm(P))):
        raise ValueError("Passivity certificate P must be symmetric")
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")

    lmi = passivity_lmi(A, G, H, J, P, gamma)
    eigvals = np.linalg.eigvalsh(lmi)
    margin = float(eigvals[-1])
    if np.linalg.eigvalsh(P)[0] <= 0:
        return False, margin
    scale = max(1.0, float(np.max(np.abs(eigvals))))
    return margin <= tol * scale, margin


def bisect_gamma(A, G, H, J, P, tol: float = 1e-9, gamma_cap: float = 2.0 ** 40) -> float:
    """
    Largest dissipation rate for which the certificate stays feasible

    The bracket is doubled until infeasible, bisected GAMMA_BISECTIONS times,
    and the lower end is backed off by GAMMA_BACKOFF so the result is strictly
    inside the feasible set.

    Returns:
        gamma (0.0 when even an arbitrarily small rate is infeasible)
    """
    def feasible(gamma: float) -> bool:
        return check_strict_passivity(A, G, H, J, P, gamma, tol)[0]

    lo = 1e-12
    if not feasible(lo):
        return 0.0
    hi = 1.0
    while feasible(hi):
        lo = hi
        hi *= 2.0
        if hi > gamma_cap:
            return lo
    for _ in range(GAMMA_BISECTIONS):
        mid = (lo + hi) / 2
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo * GAMMA_BACKOFF


@dataclass
class GainSynthesisResult:
    """Outcome of find_passifying_gain; K and P are None when no certificate was found"""
    K: Optional[np.ndarray]
    P: Optional[np.ndarray]
    gamma: float
    margin: float
    iterations: int
    error: Optional[str] = None

    @property
    def success(self) -> bool:
        return self.error is None and self.K is not None


class _LmiMap:
    """
    Affine map (Q, Y) -> Z for the convexified LMI at a fixed rate gamma

        Z = [[A Q + Q A^T + B Y + Y^T B^T + gamma Q,  G - Q H^T],
             [G^T - H Q,                              -(J + J^T)]]

    Q is parametrized by its upper triangle, Y by all its entries.
    """

    def __init__(self, A, B, G, H, J, gamma: float):
        self.n = A.shape[0]
        self.m = B.shape[1]
        self.d = G.shape[1]
        n, m, d = self.n, self.m, self.d
        self.tri = list(zip(*np.triu_indices(n)))
        size = n + d

        offset = np.zeros((size, size))
        offset[:n, n:] = G
        offset[n:, :n] = G.T
        offset[n:, n:] = -(J + J.T)
        self.offset = offset.flatten()

        columns = []
        weights = []
        for i, j in self.tri:
            E = np.zeros((n, n))
            E[i, j] = E[j, i] = 1.0
            Z = np.zeros((size, size))
            Z[:n, :n] = A @ E + E @ A.T + gamma * E
            Z[:n, n:] = -E @ H.T
            Z[n:, :n] = -H @ E
            columns.append(Z.flatten())
            weights.append(1.0 if i == j else 2.0)
        for i in range(m):
            for j in range(n):
                E = np.zeros((m, n))
                E[i, j] = 1.0
                Z = np.zeros((size, size))
                Z[:n, :n] = B @ E + E.T @ B.T
                columns.append(Z.flatten())
                weights.append(1.0)
        self.linear = np.column_stack(columns)
        self.weights = np.array(weights)

        # (G - Q H^T) U = 0 on U = ker(J + J^T), where the LMI has no slack
        U = kernel_basis(J)
        self.eq_matrix, self.eq_rhs = self._kernel_constraints(H, G, U)
        normal = np.diag(self.weights) + self.linear.T @ self.linear
        k = self.eq_matrix.shape[0]
        kkt = np.block([[normal, self.eq_matrix.T], [self.eq_matrix, np.zeros((k, k))]])
        self.kkt_inverse = np.linalg.pinv(kkt)

    def _kernel_constraints(self, H, G, U) -> Tuple[np.ndarray, np.ndarray]:
        n, m = self.n, self.m
        width = len(self.tri) + m * n
        if U.shape[1] == 0:
            return np.zeros((0, width)), np.zeros(0)
        HU = H.T @ U
        GU = G @ U
        rows, rhs = [], []
        for col in range(U.shape[1]):
            for i in range(n):
                row = np.zeros(width)
                for k, (a, b) in enumerate(self.tri):
                    if a == i:
                        row[k] += HU[b, col]
                    if b == i and a != b:
                        row[k] += HU[a, col]
                rows.append(row)
                rhs.append(GU[i, col])
        return np.array(rows), np.array(rhs)

    def unpack(self, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        n, m = self.n, self.m
        Q = np.zeros((n, n))
        for k, (i, j) in enumerate(self.tri):
            Q[i, j] = Q[j, i] = p[k]
        Y = p[len(self.tri):].reshape(m, n)
        return Q, Y

    def pack(self, Q: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return np.concatenate([[Q[i, j] for i, j in self.tri], Y.flatten()])

    def apply(self, p: np.ndarray) -> np.ndarray:
        size = self.n + self.d
        return (self.offset + self.linear @ p).reshape(size, size)

    def project(self, p: np.ndarray, Z: np.ndarray) -> np.ndarray:
        """Nearest (p, L(p)) to (p, Z) in the weighted Frobenius metric, kernel constraints enforced"""
        rhs = self.weights * p + self.linear.T @ (Z.flatten() - self.offset)
        solution = self.kkt_inverse @ np.concatenate([rhs, self.eq_rhs])
        return solution[:len(p)]


def _clip_upper(S: np.ndarray, bound: float) -> np.ndarray:
    """Nearest symmetric matrix with eigenvalues <= bound"""
    eigvals, eigvecs = np.linalg.eigh((S + S.T) / 2)
    return (eigvecs * np.minimum(eigvals, bound)) @ eigvecs.T


def _clip_lower(S: np.ndarray, bound: float) -> np.ndarray:
    eigvals, eigvecs = np.linalg.eigh((S + S.T) / 2)
    return (eigvecs * np.maximum(eigvals, bound)) @ eigvecs.T


def find_passifying_gain(
    A,
    B,
    G,
    H,
    J,
    gamma: float = 1e-3,
    max_iter: int = 5000,
    certify_every: int = 50,
    slack: float = 1e-2,
    q_floor: float = 1e-2,
    tol: float = 1e-9
) -> GainSynthesisResult:
    """
    Find K and P making (A + BK, G, H, J) strictly passive

    Alternating projections in (Q, Y, Z), Q = P^-1, Y = K Q, between the graph
    of the convexified LMI map and the set {Z + slack * diag(I, 0) <= 0, Q >= q_floor I}.
    The current iterate is converted to (K, P) and certified every
    certify_every iterations.

    Args:
        A, B, G, H, J: Plant data
        gamma: Dissipation rate used inside the projections
        max_iter: Iteration cap
        certify_every: Certification period
        slack: Strictness imposed on the top-left block
        q_floor: Lower eigenvalue bound on Q
        tol: Certification tolerance

    Returns:
        GainSynthesisResult (error set when the cap is reached)
    """
    A, B, G, H, J = (_as2d(m) for m in (A, B, G, H, J))
    n = A.shape[0]
    if B.shape[0] != n:
        raise DimensionError(f"B must have {n} rows, got {B.shape}")

    lmi_map = _LmiMap(A, B, G, H, J, gamma)
    shift = np.zeros((n + G.shape[1],) * 2)
    shift[:n, :n] = slack * np.eye(n)

    p = lmi_map.pack(np.eye(n), np.zeros((B.shape[1], n)))
    Z = lmi_map.apply(p)
    best = np.inf

    for iteration in range(max_iter + 1):
        if iteration % certify_every == 0:
            candidate = _certify(A, B, G, H, J, lmi_map, p, tol)
            if candidate is not None:
                K, P, rate, margin = candidate
                logger.info(f"Passifying gain certified after {iteration} iterations (gamma={rate:.6g})")
                return GainSynthesisResult(K=K, P=P, gamma=rate, margin=margin, iterations=iteration)
            best = min(best, float(np.linalg.eigvalsh(lmi_map.apply(p))[-1]))
        if iteration == max_iter:
            break

        Q, Y = lmi_map.unpack(p)
        Q = _clip_lower(Q, q_floor)
        Z = _clip_upper(Z + shift, 0.0) - shift
        p = lmi_map.project(lmi_map.pack(Q, Y), Z)
        Z = lmi_map.apply(p)

    logger.warning(f"Gain synthesis hit the iteration cap ({max_iter}); best LMI eigenvalue {best:.3e}")
    return GainSynthesisResult(
        K=None,
        P=None,
        gamma=0.0,
        margin=float(best),
        iterations=max_iter,
        error=f"iteration cap {max_iter} reached without a certificate (best eigenvalue {best:.3e})",
    )


def _certify(A, B, G, H, J, lmi_map: _LmiMap, p: np.ndarray, tol: float):
    Q, Y = lmi_map.unpack(p)
    if np.linalg.eigvalsh(Q)[0] <= 0:
        return None
    P = np.linalg.inv(Q)
    P = (P + P.T) / 2
    K = Y @ P
    A_cl = A + B @ K
    rate = bisect_gamma(A_cl, G, H, J, P, tol)
    if rate <= 0:
        return None
    feasible, margin = check_strict_passivity(A_cl, G, H, J, P, rate, tol)
    if not feasible:
        return None
    return K, P, rate, margin


def find_observer_gain(A_hat, C_hat, G_hat, H_hat, J_hat, **kwargs) -> GainSynthesisResult:
    """
    Injection gain L making (A_hat - L C_hat, G_hat, H_hat, J_hat) strictly passive

    Runs find_passifying_gain on the dual data (A_hat^T, -C_hat^T, -H_hat^T,
    -G_hat^T, J_hat^T): its Q is the observer certificate P_hat and its gain is L^T.

    Returns:
        GainSynthesisResult whose K holds L and whose P holds P_hat
    """
    A_hat, C_hat, G_hat, H_hat, J_hat = (_as2d(m) for m in (A_hat, C_hat, G_hat, H_hat, J_hat))
    dual = find_passifying_gain(A_hat.T, -C_hat.T, -H_hat.T, -G_hat.T, J_hat.T, **kwargs)
    if not dual.success:
        return dual

    L = dual.K.T
    P_hat = np.linalg.inv(dual.P)
    P_hat = (P_hat + P_hat.T) / 2
    A_obs = A_hat - L @ C_hat
    rate = bisect_gamma(A_obs, G_hat, H_hat, J_hat, P_hat)
    if rate <= 0:
        return GainSynthesisResult(
            K=None, P=None, gamma=0.0, margin=float("nan"), iterations=dual.iterations,
            error="dual certificate does not transfer to the observer quadruple",
        )
    _, margin = check_strict_passivity(A_obs, G_hat, H_hat, J_hat, P_hat, rate)
    return GainSynthesisResult(K=L, P=P_hat, gamma=rate, margin=margin, iterations=dual.iterations)


def stacked_quadruple(A_cl, G, H, J, Pi, G_r, J_r):
    """
    (A_cl, [G, Pi G_r], [H; H], [[J, J_r], [J, J_r]]) for the plant/exosystem pair

    Returns:
        Tuple (A, G, H, J) of the stacked quadruple
    """
    A_cl, G, H, J, Pi, G_r, J_r = (_as2d(m) for m in (A_cl, G, H, J, Pi, G_r, J_r))
    G_stack = np.hstack([G, Pi @ G_r])
    H_stack = np.vstack([H, H])
    J_stack = np.block([[J, J_r], [J, J_r]])
    return A_cl, G_stack, H_stack, J_stack
