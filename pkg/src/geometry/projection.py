"""
Euclidean projection onto polyhedral cones and moving sets, Hausdorff estimates
"""
import itertools
import logging
from typing import Optional

import numpy as np

from utils.errors import InfeasibleSetError
from .cones import DEFAULT_TOL, PolyhedralCone
from .moving_set import MovingSet
from .signals import StaircaseSignal

logger = logging.getLogger(__name__)

# above this many faces the exact active-set search is replaced by Dykstra
ACTIVE_SET_CAP = 12


def project_onto_cone(
    cone: PolyhedralCone,
    p: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iter: int = 20000
) -> np.ndarray:
    """
    Projection of p onto K = {y : R y >= 0}

    Uses active-set enumeration over face subsets (in order of increasing size)
    up to ACTIVE_SET_CAP faces, Dykstra's alternating projections beyond.

    Args:
        cone: Target cone
        p: Point to project
        tol: Feasibility/multiplier sign tolerance

    Returns:
        The nearest point of K
    """
    p = np.asarray(p, dtype=float)
    R = cone.face_form()
    m = R.shape[0]
    if m == 0:
        return p.copy()
    if cone.is_orthant:
        return np.maximum(p, 0.0)

    scale = max(1.0, float(np.max(np.abs(p))))
    if np.min(R @ p) >= -tol * scale:
        return p.copy()

    if m <= ACTIVE_SET_CAP:
        y = _active_set_projection(R, p, tol * scale)
        if y is not None:
            return y
        logger.warning("Active-set projection found no KKT point, falling back to Dykstra")

    return _dykstra_projection(R, p, tol * scale, max_iter)


def _active_set_projection(R: np.ndarray, p: np.ndarray, tol: float) -> Optional[np.ndarray]:
    m = R.shape[0]
    for size in range(1, m + 1):
        for subset in itertools.combinations(range(m), size):
            RA = R[list(subset)]
            # y = p + RA^T mu with RA y = 0
            mu, *_ = np.linalg.lstsq(RA @ RA.T, -(RA @ p), rcond=None)
            if np.min(mu) < -tol:
                continue
            y = p + RA.T @ mu
            if np.max(np.abs(RA @ y)) > tol * 10 or np.min(R @ y) < -tol:
                continue
            return y
    return None


def _dykstra_projection(R: np.ndarray, p: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    m = R.shape[0]
    norms = np.einsum("ij,ij->i", R, R)
    y = p.copy()
    increments = np.zeros((m, p.shape[0]))
    for iteration in range(max_iter):
        y_prev = y.copy()
        for i in range(m):
            if norms[i] == 0:
                continue
            z = y + increments[i]
            s = R[i] @ z
            y_new = z - (min(s, 0.0) / norms[i]) * R[i]
            increments[i] = z - y_new
            y = y_new
        if np.linalg.norm(y - y_prev) <= tol * 1e-3:
            logger.debug(f"Dykstra projection converged in {iteration + 1} sweeps")
            break
    else:
        logger.warning(f"Dykstra projection hit the sweep cap ({max_iter})")
    return y


def project_onto_set(moving_set: MovingSet, t: float, x: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """
    Projection of x onto S(t) = K - h(t)

    Args:
        moving_set: The moving set
        t: Time at which S is evaluated
        x: Point to project

    Returns:
        argmin over v in S(t) of |x - v|
    """
    h = moving_set.h(t)
    x = np.asarray(x, dtype=float)
    if x.shape != h.shape:
        raise InfeasibleSetError(f"Point of shape {x.shape} cannot be projected onto S(t) in R^{h.shape[0]}", t=t)
    return project_onto_cone(moving_set.cone, x + h, tol) - h


def distance_to_cone(cone: PolyhedralCone, p: np.ndarray) -> float:
    p = np.asarray(p, dtype=float)
    return float(np.linalg.norm(p - project_onto_cone(cone, p)))


def translate_hausdorff(cone: PolyhedralCone, h1: np.ndarray, h2: np.ndarray) -> float:
    """
    Exact Hausdorff distance between K - h1 and K - h2

    For translates of a cone the supremum is attained at the apex:
    max(dist(h2 - h1, K), dist(h1 - h2, K)).
    """
    delta = np.asarray(h2, dtype=float) - np.asarray(h1, dtype=float)
    return max(distance_to_cone(cone, delta), distance_to_cone(cone, -delta))


def _directions(d: int, n_dirs: int, seed: int) -> np.ndarray:
    """Nested direction sequence: +/- unit vectors first, then seeded random ones"""
    basis = []
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        basis.extend([e, -e])
    rng = np.random.default_rng(seed)
    extra = max(0, n_dirs - len(basis))
    random_dirs = rng.normal(size=(extra, d))
    random_dirs /= np.maximum(np.linalg.norm(random_dirs, axis=1, keepdims=True), 1e-300)
    dirs = np.array(basis + list(random_dirs)) if d > 0 else np.zeros((0, 0))
    return dirs[:n_dirs]


def hausdorff_estimate(
    moving_set: MovingSet,
    t1: float,
    t2: float,
    n_dirs: int = 64,
    radius: Optional[float] = None,
    seed: int = 0
) -> float:
    """
    Lower estimate of the Hausdorff distance between S(t1) and S(t2)

    Support points of each set (apex and projections of apex + radius * u for
    sampled directions u) are measured against the other set. The direction
    sequence is nested, so the estimate never decreases as n_dirs grows.

    Args:
        moving_set: The moving set
        t1, t2: Times to compare
        n_dirs: Number of sampled directions
        radius: Sampling radius (defaults to 1 + |h1| + |h2|)
        seed: Seed for the random part of the direction sequence

    Returns:
        Estimate of d_Haus(S(t1), S(t2))
    """
    moving_set.check_nonempty(t1)
    moving_set.check_nonempty(t2)
    h1 = moving_set.h(t1)
    h2 = moving_set.h(t2)
    cone = moving_set.cone

    if np.array_equal(h1, h2):
        return 0.0

    rho = radius if radius is not None else 1.0 + float(np.linalg.norm(h1) + np.linalg.norm(h2))

    def gap(point: np.ndarray, h_other: np.ndarray) -> float:
        return distance_to_cone(cone, point + h_other)

    best = max(gap(-h1, h2), gap(-h2, h1))
    for u in _directions(moving_set.dim, n_dirs, seed):
        a = project_onto_cone(cone, rho * u) - h1
        b = project_onto_cone(cone, rho * u) - h2
        best = max(best, gap(a, h2), gap(b, h1))
    return best


def fit_hausdorff_constant(
    cone: PolyhedralCone,
    n_samples: int = 200,
    seed: int = 0,
    margin: float = 1.05,
    n_dirs: int = 32
) -> float:
    """
    Fit c_K with d_Haus(K - h1, K - h2) <= c_K |h1 - h2| on random offset pairs

    Args:
        cone: The cone K
        n_samples: Calibration pairs
        seed: RNG seed
        margin: Multiplicative safety factor applied to the largest observed ratio

    Returns:
        Fitted constant c_K
    """
    rng = np.random.default_rng(seed)
    d = cone.dim
    worst = 0.0
    for _ in range(n_samples):
        h1 = rng.normal(size=d)
        h2 = rng.normal(size=d)
        gap = float(np.linalg.norm(h1 - h2))
        if gap < 1e-12:
            continue
        pair_set = MovingSet(cone, StaircaseSignal([0.0, 1.0], [h1, h2]), "right_continuous_bv")
        worst = max(worst, hausdorff_estimate(pair_set, 0.0, 1.0, n_dirs=n_dirs, seed=seed) / gap)
    c_k = worst * margin
    logger.info(f"Fitted Hausdorff constant c_K={c_k:.6g} from {n_samples} samples")
    return c_k

