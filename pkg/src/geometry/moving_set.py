"""
Moving sets S(t) = K - h(t) and cone complementarity instances
"""
import logging
from dataclasses import dataclass
from typing import Iterable, List, Literal, Optional, Tuple

import numpy as np
from scipy.optimize import linprog

from utils.errors import DimensionError, InfeasibleSetError
from .cones import DEFAULT_TOL, PolyhedralCone
from .signals import Signal

logger = logging.getLogger(__name__)

Regularity = Literal["absolutely_continuous", "right_continuous_bv"]


@dataclass(frozen=True)
class MovingSet:
    """
    Translated cone S(t) = {z : R (z + h(t)) >= 0}

    Args:
        cone: The fixed cone K
        offset: Signal h(t)
        regularity: absolutely_continuous or right_continuous_bv
        variation_bound: Optional Lipschitz constant of h for the absolutely continuous case
    """
    cone: PolyhedralCone
    offset: Signal
    regularity: Regularity = "absolutely_continuous"
    variation_bound: Optional[float] = None

    def __post_init__(self):
        if self.offset.dim != self.cone.dim:
            raise DimensionError(
                f"Offset has dimension {self.offset.dim}, cone lives in R^{self.cone.dim}"
            )
        if self.regularity not in ("absolutely_continuous", "right_continuous_bv"):
            raise ValueError(f"Unknown regularity: {self.regularity}")
        if self.regularity == "absolutely_continuous" and not self.offset.is_continuous:
            raise ValueError("A discontinuous offset requires regularity right_continuous_bv")

    @property
    def dim(self) -> int:
        return self.cone.dim

    def h(self, t: float) -> np.ndarray:
        """Offset at t, rejecting non-finite values"""
        value = self.offset(t)
        if not np.all(np.isfinite(value)):
            raise InfeasibleSetError(f"Offset h(t) is not finite at t={t}", t=t)
        return value

    def h_left(self, t: float) -> np.ndarray:
        value = self.offset.left_limit(t)
        if not np.all(np.isfinite(value)):
            raise InfeasibleSetError(f"Offset h(t-) is not finite at t={t}", t=t)
        return value

    def hdot(self, t: float) -> np.ndarray:
        return self.offset.derivative(t)

    def breakpoints(self, t0: float, t1: float) -> List[float]:
        if self.regularity == "absolutely_continuous":
            return []
        return self.offset.breakpoints(t0, t1)

    def contains(self, z: np.ndarray, t: float, tol: float = DEFAULT_TOL) -> bool:
        return self.cone.contains(np.asarray(z, dtype=float) + self.h(t), tol)

    def check_nonempty(self, t: float) -> bool:
        """Feasibility of S(t) by one LP solve"""
        h = self.h(t)
        R = self.cone.face_form()
        if R.shape[0] == 0:
            return True
        d = self.dim
        result = linprog(
            c=np.zeros(d),
            A_ub=-R,
            b_ub=R @ h,
            bounds=[(None, None)] * d,
            method="highs",
        )
        if result.status != 0:
            raise InfeasibleSetError(f"S(t) is empty at t={t}: {result.message}", t=t)
        return True

    def check_variation(self, times: Iterable[float]) -> Tuple[bool, float]:
        """
        Sampled Lipschitz check of h against variation_bound

        Returns:
            (passes, largest sampled slope)
        """
        times = sorted(float(t) for t in times)
        slope = 0.0
        for t1, t2 in zip(times[:-1], times[1:]):
            if t2 > t1:
                slope = max(slope, float(np.linalg.norm(self.h(t2) - self.h(t1))) / (t2 - t1))
        if self.variation_bound is None or self.regularity != "absolutely_continuous":
            return True, slope
        return slope <= self.variation_bound * (1 + 1e-9), slope


@dataclass(frozen=True)
class ConeCpInstance:
    """
    Cone complementarity data K ∋ Hx + J eta + h(t) ⟂ eta ∈ K*

    Args:
        H: d_s x n output matrix
        J: d_s x d_s feedthrough
        moving_set: Supplies K and h(t)
    """
    H: np.ndarray
    J: np.ndarray
    moving_set: MovingSet

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        J = np.atleast_2d(np.asarray(self.J, dtype=float))
        d = self.moving_set.dim
        if H.shape[0] != d or J.shape != (d, d):
            raise DimensionError(
                f"Cone CP dimensions disagree: H {H.shape}, J {J.shape}, cone R^{d}"
            )
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "J", J)

    @property
    def cone(self) -> PolyhedralCone:
        return self.moving_set.cone

    def v(self, x: np.ndarray, eta: np.ndarray, t: float) -> np.ndarray:
        """Cone-side variable Hx + J eta + h(t)"""
        return self.H @ x + self.J @ eta + self.moving_set.h(t)
