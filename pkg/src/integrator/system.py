"""
EVI system description and simulated trajectories

    x'(t) = A x + B u(t) + F x_r(t) + B_ext f_ext(t) + f(t, x) + G eta
    v(t)  = H x + J eta + h(t) ∈ K,   eta ∈ K*,   <eta, v> = 0
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional

import numpy as np

from geometry import ConeCpInstance, MovingSet, Signal
from utils.errors import DimensionError

logger = logging.getLogger(__name__)

Drift = Callable[[float, np.ndarray], np.ndarray]


def _matrix(value, name: str) -> Optional[np.ndarray]:
    if value is None:
        return None
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be a matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class EviSystem:
    """
    Linear EVI with optional inputs, exogenous coupling and external forcing

    Args:
        A: n x n drift matrix
        G: n x d multiplier matrix
        H: d x n constraint output matrix
        J: d x d feedthrough
        moving_set: S(t) = K - h(t) in R^d
        B, u: Input matrix and input signal
        F, x_r: Exogenous coupling matrix and exogenous state signal
        B_ext, f_ext: External forcing matrix and signal
        C, C_r: Regulation output w = C x - C_r x_r
        drift: Optional nonlinear term f(t, x), integrated explicitly
        lipschitz_modulus: Lipschitz modulus of the drift (defaults to |A|_2)
        name: Label used in logs and reports
    """
    A: np.ndarray
    G: np.ndarray
    H: np.ndarray
    J: np.ndarray
    moving_set: MovingSet
    B: Optional[np.ndarray] = None
    u: Optional[Signal] = None
    F: Optional[np.ndarray] = None
    x_r: Optional[Signal] = None
    B_ext: Optional[np.ndarray] = None
    f_ext: Optional[Signal] = None
    C: Optional[np.ndarray] = None
    C_r: Optional[np.ndarray] = None
    drift: Optional[Drift] = field(default=None, compare=False)
    lipschitz_modulus: Optional[float] = None
    name: str = "evi"

    def __post_init__(self):
        for attr in ("A", "G", "H", "J", "B", "F", "B_ext", "C", "C_r"):
            object.__setattr__(self, attr, _matrix(getattr(self, attr), attr))

        n = self.A.shape[0]
        d = self.moving_set.dim
        if self.A.shape != (n, n):
            raise DimensionError(f"A must be square, got {self.A.shape}")
        if self.G.shape != (n, d):
            raise DimensionError(f"G must be {n}x{d}, got {self.G.shape}")
        if self.H.shape != (d, n):
            raise DimensionError(f"H must be {d}x{n}, got {self.H.shape}")
        if self.J.shape != (d, d):
            raise DimensionError(f"J must be {d}x{d}, got {self.J.shape}")

        for matrix_name, signal_name in (("B", "u"), ("F", "x_r"), ("B_ext", "f_ext")):
            matrix = getattr(self, matrix_name)
            signal = getattr(self, signal_name)
            if matrix is None:
                continue
            if matrix.shape[0] != n:
                raise DimensionError(f"{matrix_name} must have {n} rows, got {matrix.shape}")
            if signal is not None and signal.dim != matrix.shape[1]:
                raise DimensionError(
                    f"Signal {signal_name} has dimension {signal.dim}, "
                    f"{matrix_name} expects {matrix.shape[1]}"
                )

        if self.C is not None and self.C.shape[1] != n:
            raise DimensionError(f"C must have {n} columns, got {self.C.shape}")
        if self.C_r is not None:
            if self.C is None or self.C_r.shape[0] != self.C.shape[0]:
                raise DimensionError("C_r needs C with the same number of rows")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.moving_set.dim

    @property
    def instance(self) -> ConeCpInstance:
        return ConeCpInstance(self.H, self.J, self.moving_set)

    @property
    def rho(self) -> float:
        """Lipschitz modulus of the drift"""
        if self.lipschitz_modulus is not None:
            return float(self.lipschitz_modulus)
        return float(np.linalg.norm(self.A, 2))

    def suggest_dt(self) -> float:
        """Heuristic step size 0.1 / rho"""
        rho = self.rho
        return 0.1 / rho if rho > 0 else float("inf")

    def forcing(self, t: float, x: np.ndarray) -> np.ndarray:
        """Everything in x' except A x and G eta"""
        total = np.zeros(self.n)
        for matrix, signal in ((self.B, self.u), (self.F, self.x_r), (self.B_ext, self.f_ext)):
            if matrix is not None and signal is not None:
                total += matrix @ signal(t)
        if self.drift is not None:
            total += np.asarray(self.drift(t, x), dtype=float)
        return total

    def constraint_value(self, x: np.ndarray, eta: np.ndarray, t: float, left: bool = False) -> np.ndarray:
        """v = H x + J eta + h(t), with h(t-) when left is set"""
        h = self.moving_set.h_left(t) if left else self.moving_set.h(t)
        return self.H @ x + self.J @ eta + h

    def regulation_output(self, x: np.ndarray, x_r: Optional[np.ndarray] = None) -> np.ndarray:
        if self.C is None:
            raise DimensionError(f"System {self.name} has no regulation output C")
        w = self.C @ x
        if self.C_r is not None and x_r is not None:
            w = w - self.C_r @ x_r
        return w

    def with_moving_set(self, moving_set: MovingSet) -> "EviSystem":
        return replace(self, moving_set=moving_set)


@dataclass(frozen=True)
class JumpRecord:
    t: float
    x_minus: np.ndarray
    x_plus: np.ndarray

    @property
    def size(self) -> float:
        return float(np.linalg.norm(self.x_plus - self.x_minus))


@dataclass
class Trajectory:
    """
    Grid samples of a simulated EVI

    multipliers[k] is the step multiplier on (t_{k-1}, t_k], or the impulse when
    jump_flags[k] is set; constraint_values[k] = H x_k + J multipliers[k] + h(t_k).
    """
    times: np.ndarray
    states: np.ndarray
    multipliers: np.ndarray
    constraint_values: np.ndarray
    jumps: List[JumpRecord] = field(default_factory=list)
    jump_flags: np.ndarray = None
    lipschitz: float = 0.0
    dt: float = 0.0
    name: str = "evi"
    max_residual: float = 0.0

    def __post_init__(self):
        if self.jump_flags is None:
            self.jump_flags = np.zeros(len(self.times), dtype=bool)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def d(self) -> int:
        return self.multipliers.shape[1]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]
