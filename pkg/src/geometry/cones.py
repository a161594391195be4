"""
Polyhedral cones K = {y : R y >= 0}, their duals and normal-cone tests
"""
import itertools
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import nnls

from utils.errors import DimensionError

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9

# largest ambient dimension for which face/generator conversion is enumerated
FACE_ENUM_CAP = 8


@dataclass(frozen=True)
class PolyhedralCone:
    """
    Closed convex cone in face form {y : R y >= 0} and/or generator form cone(Gm)

    Args:
        face_matrix: m x d matrix R (rows are inward face normals), may have m = 0
        generator_matrix: d x k matrix whose columns generate the cone
        enumeration_capped: One of the two forms was not computed because the
            dimension exceeds FACE_ENUM_CAP
    """
    face_matrix: Optional[np.ndarray] = None
    generator_matrix: Optional[np.ndarray] = None
    enumeration_capped: bool = False

    def __post_init__(self):
        R = self.face_matrix
        Gm = self.generator_matrix
        if R is None and Gm is None:
            raise ValueError("A cone needs a face matrix or a generator matrix")

        if R is not None:
            R = np.asarray(R, dtype=float)
            if R.ndim != 2:
                raise DimensionError(f"face_matrix must be 2-D, got shape {R.shape}")
            object.__setattr__(self, "face_matrix", R)
        if Gm is not None:
            Gm = np.asarray(Gm, dtype=float)
            if Gm.ndim != 2:
                raise DimensionError(f"generator_matrix must be 2-D, got shape {Gm.shape}")
            object.__setattr__(self, "generator_matrix", Gm)

        if R is not None and Gm is not None and R.shape[1] != Gm.shape[0]:
            raise DimensionError(
                f"face_matrix acts on R^{R.shape[1]} but generators live in R^{Gm.shape[0]}"
            )
        for data in (R, Gm):
            if data is not None and not np.all(np.isfinite(data)):
                raise ValueError("Cone data must be finite")

    # construction helpers

    @classmethod
    def orthant(cls, d: int) -> "PolyhedralCone":
        return cls(face_matrix=np.eye(d), generator_matrix=np.eye(d))

    @classmethod
    def full_space(cls, d: int) -> "PolyhedralCone":
        eye = np.eye(d)
        return cls(face_matrix=np.zeros((0, d)), generator_matrix=np.hstack([eye, -eye]))

    @classmethod
    def product(cls, *cones: "PolyhedralCone") -> "PolyhedralCone":
        """Cartesian product K1 x K2 x ... with block-diagonal face matrix"""
        faces = [c.face_form() for c in cones]
        rows = sum(f.shape[0] for f in faces)
        cols = sum(f.shape[1] for f in faces)
        R = np.zeros((rows, cols))
        r = c = 0
        for f in faces:
            R[r:r + f.shape[0], c:c + f.shape[1]] = f
            r += f.shape[0]
            c += f.shape[1]
        return cls(face_matrix=R)

    @property
    def dim(self) -> int:
        if self.face_matrix is not None:
            return self.face_matrix.shape[1]
        return self.generator_matrix.shape[0]

    @property
    def has_face_form(self) -> bool:
        return self.face_matrix is not None

    @cached_property
    def is_orthant(self) -> bool:
        R = self.face_matrix
        return R is not None and R.shape[0] == R.shape[1] and np.array_equal(R, np.eye(R.shape[0]))

    def face_form(self) -> np.ndarray:
        """Face matrix R, converting from generators when needed"""
        if self.face_matrix is not None:
            return self.face_matrix
        if self.dim > FACE_ENUM_CAP:
            raise DimensionError(
                f"Face form of a generator-only cone in dimension {self.dim} exceeds "
                f"the enumeration cap {FACE_ENUM_CAP}"
            )
        return self._face_from_generators

    @cached_property
    def _face_from_generators(self) -> np.ndarray:
        # K = cone(Gm) = {y : Y^T y >= 0} with Y the generators of {y : Gm^T y >= 0}
        return cone_generators(self.generator_matrix.T).T

    # membership

    def primal_violation(self, y: np.ndarray) -> float:
        """How far y is from satisfying y in K (0 when inside)"""
        y = np.asarray(y, dtype=float)
        if self.face_matrix is not None:
            if self.face_matrix.shape[0] == 0:
                return 0.0
            return float(max(0.0, -np.min(self.face_matrix @ y)))
        return _nnls_distance(self.generator_matrix, y)

    def dual_violation(self, eta: np.ndarray) -> float:
        """Distance-type measure of eta from the dual cone K*"""
        eta = np.asarray(eta, dtype=float)
        if self.is_orthant:
            return float(np.linalg.norm(np.minimum(eta, 0.0)))
        if self.face_matrix is not None:
            # K* = cone(R^T)
            return _nnls_distance(self.face_matrix.T, eta)
        # K* = {eta : Gm^T eta >= 0}
        return float(max(0.0, -np.min(self.generator_matrix.T @ eta)))

    def contains(self, y: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
        return self.primal_violation(y) <= tol

    def dual_contains(self, eta: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
        return self.dual_violation(eta) <= tol


def _nnls_distance(generators: np.ndarray, y: np.ndarray) -> float:
    """Distance from y to cone(generators) via nonnegative least squares"""
    if generators.shape[1] == 0:
        return float(np.linalg.norm(y))
    _, rnorm = nnls(generators, y)
    return float(rnorm)


def cone_generators(R: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """
    Generators of {y : R y >= 0} by extreme-ray enumeration

    Lineality directions are returned as +/- pairs, extreme rays of the pointed
    part are found as one-dimensional null spaces of rank-1 active row subsets.

    Args:
        R: m x d face matrix
        tol: Sign tolerance when orienting candidate rays

    Returns:
        d x k matrix of unit-norm generators
    """
    R = np.asarray(R, dtype=float)
    m, d = R.shape
    if d > FACE_ENUM_CAP:
        raise DimensionError(f"Ray enumeration capped at dimension {FACE_ENUM_CAP}, got {d}")

    lineality = null_space(R) if m > 0 else np.eye(d)
    rank = d - lineality.shape[1]
    rays: List[np.ndarray] = []

    if rank > 0:
        for subset in itertools.combinations(range(m), rank - 1):
            rows = [R[list(subset)]] if subset else []
            if lineality.shape[1] > 0:
                rows.append(lineality.T)
            A = np.vstack(rows) if rows else np.zeros((0, d))
            kernel = null_space(A) if A.shape[0] > 0 else np.eye(d)
            if kernel.shape[1] != 1:
                continue
            y = kernel[:, 0]
            s = R @ y
            scale = max(1.0, float(np.max(np.abs(s))))
            if np.all(s >= -tol * scale):
                candidate = y
            elif np.all(-s >= -tol * scale):
                candidate = -y
            else:
                continue
            candidate = candidate / np.linalg.norm(candidate)
            if not any(np.allclose(candidate, r, atol=1e-9) for r in rays):
                rays.append(candidate)

    columns = rays + [lineality[:, j] for j in range(lineality.shape[1])] \
        + [-lineality[:, j] for j in range(lineality.shape[1])]
    if not columns:
        return np.zeros((d, 0))
    return np.column_stack(columns)


def dual_cone(cone: PolyhedralCone) -> PolyhedralCone:
    """
    Dual cone K* = {eta : <eta, y> >= 0 for all y in K}

    The generator form of K* is R^T. A face form is added by enumeration when
    the dimension is within FACE_ENUM_CAP; above it only generators are returned.

    Args:
        cone: Cone in face or generator form

    Returns:
        PolyhedralCone for K*, with enumeration_capped set when a form is missing
    """
    d = cone.dim
    face = None
    generators = None
    capped = False

    if cone.has_face_form:
        generators = cone.face_matrix.T

    if cone.generator_matrix is not None:
        face = cone.generator_matrix.T
    elif d <= FACE_ENUM_CAP:
        face = cone_generators(cone.face_matrix).T
    else:
        capped = True
        logger.warning(
            f"Dual cone in dimension {d} returned in generator form only "
            f"(face enumeration capped at {FACE_ENUM_CAP})"
        )

    if generators is None:
        # generator-only input: K* = {eta : Gm^T eta >= 0}
        if d <= FACE_ENUM_CAP:
            generators = cone_generators(face)
        else:
            capped = True
            logger.warning(f"Dual cone in dimension {d} returned in face form only")

    return PolyhedralCone(face_matrix=face, generator_matrix=generators, enumeration_capped=capped)


def normal_cone_residual(
    cone: PolyhedralCone,
    v: np.ndarray,
    eta: np.ndarray,
    h: np.ndarray,
    tol: float = DEFAULT_TOL
) -> float:
    """
    Residual of eta in -N_S(v) for S = K - h

    Args:
        cone: The cone K
        v: Point in S-coordinates
        eta: Candidate multiplier
        h: Offset so that v + h must lie in K

    Returns:
        max(primal violation, dual violation, |<eta, v + h>|), or +inf when
        v + h is outside K beyond tol (the normal cone is empty there)
    """
    v = np.asarray(v, dtype=float)
    eta = np.asarray(eta, dtype=float)
    h = np.asarray(h, dtype=float)
    if not (v.shape == eta.shape == h.shape == (cone.dim,)):
        raise DimensionError(
            f"normal_cone_residual expects vectors of length {cone.dim}, "
            f"got v{v.shape}, eta{eta.shape}, h{h.shape}"
        )

    y = v + h
    primal = cone.primal_violation(y)
    if primal > tol:
        return float("inf")
    return max(primal, cone.dual_violation(eta), abs(float(eta @ y)))
