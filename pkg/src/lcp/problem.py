"""
LCP data types and the plain-text instance format

    0 <= z  ⟂  w = M z + q >= 0
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np

from utils.errors import DimensionError
from utils.textio import format_float

logger = logging.getLogger(__name__)

LcpStatus = Literal["solved", "ray_termination", "infeasible"]


@dataclass(frozen=True)
class LcpProblem:
    """Square matrix M and vector q of an LCP"""
    M: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise DimensionError(f"LCP matrix must be square, got shape {M.shape}")
        if q.shape != (M.shape[0],):
            raise DimensionError(f"LCP vector has shape {q.shape}, matrix is {M.shape}")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "q", q)

    @property
    def dim(self) -> int:
        return self.q.shape[0]

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.M)) and np.all(np.isfinite(self.q)))

    def residual(self, z: np.ndarray) -> float:
        """Complementarity residual max(-min z, -min w, |<z, w>|) of a candidate z"""
        z = np.asarray(z, dtype=float)
        w = self.M @ z + self.q
        return complementarity_residual(z, w)


@dataclass
class LcpSolution:
    """
    Outcome of an LCP solve

    z and w are filled for every status; they only satisfy the complementarity
    certificate when status is "solved".
    """
    z: np.ndarray
    w: np.ndarray
    status: LcpStatus
    complementarity_residual: float
    pivots: int = 0
    error: Optional[str] = None

    @property
    def solved(self) -> bool:
        return self.status == "solved"

    def support(self, tol: float = 1e-12) -> tuple:
        """Indices with z_i > tol"""
        return tuple(int(i) for i in np.flatnonzero(self.z > tol))

    def certify(self, problem: LcpProblem, tol: float = 1e-9) -> bool:
        """Check w = Mz + q, z >= 0, w >= 0 and <z, w> ~ 0 up to a scaled tol"""
        scale = max(1.0, float(np.max(np.abs(problem.q))) if problem.dim else 1.0)
        consistent = np.allclose(self.w, problem.M @ self.z + problem.q, atol=tol * scale, rtol=0)
        return bool(consistent and problem.residual(self.z) <= tol * scale)


def complementarity_residual(z: np.ndarray, w: np.ndarray) -> float:
    if z.size == 0:
        return 0.0
    return float(max(0.0, -np.min(z), -np.min(w), abs(float(z @ w))))


def solution_from_z(problem: LcpProblem, z: np.ndarray, status: LcpStatus = "solved",
                    pivots: int = 0, error: Optional[str] = None) -> LcpSolution:
    z = np.asarray(z, dtype=float)
    w = problem.M @ z + problem.q
    return LcpSolution(
        z=z,
        w=w,
        status=status,
        complementarity_residual=complementarity_residual(z, w),
        pivots=pivots,
        error=error,
    )


def format_lcp(problem: LcpProblem) -> str:
    """Dimension line, M row-major one row per line, then q, 17 significant digits"""
    lines = [str(problem.dim)]
    for row in problem.M:
        lines.append(" ".join(format_float(v) for v in row))
    lines.append(" ".join(format_float(v) for v in problem.q))
    return "\n".join(lines) + "\n"


def parse_lcp(text: str) -> LcpProblem:
    """
    Parse the plain-text LCP format

    Args:
        text: Dimension line, d rows of M, then q (blank lines and '#' comments ignored)

    Returns:
        LcpProblem
    """
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.extend(line.split())
    if not tokens:
        raise ValueError("Empty LCP description")

    try:
        d = int(tokens[0])
        values = [float(tok) for tok in tokens[1:]]
    except ValueError as e:
        raise ValueError(f"Malformed LCP description: {e}") from e

    if d < 0 or len(values) != d * d + d:
        raise DimensionError(f"LCP of dimension {d} needs {d * d + d} numbers, got {len(values)}")

    M = np.array(values[:d * d]).reshape(d, d)
    q = np.array(values[d * d:])
    return LcpProblem(M, q)


def write_lcp(problem: LcpProblem, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_lcp(problem))
    logger.info(f"Wrote LCP instance of dimension {problem.dim} to {path}")
    return path


def read_lcp(path: Union[str, Path]) -> LcpProblem:
    return parse_lcp(Path(path).read_text())
