"""
Closed-loop assembly for the static regulator and the dynamic compensator

Static loop, state (x, x_r):

    x'   = (A + B K) x + (B (M - K Pi) + F) x_r + G eta + (B N + B_ext) f_ext
    x_r' = A_r x_r + G_r eta_r + B_r f_ext

Compensator loop, state (x, x_r, x_hat, x_hat_r), with the observer

    xi_hat' = A_hat xi_hat + B_hat u + G_hat eta_hat + L (w - C_hat xi_hat)
    u       = K x_hat + (M - K Pi) x_hat_r
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Literal, NamedTuple, Optional, Tuple

import numpy as np
from scipy.linalg import block_diag

from geometry import MovingSet, PolyhedralCone, stack_signals
from integrator import EviSystem
from utils.errors import DimensionError
from .design import RegulatorDesign

logger = logging.getLogger(__name__)

LoopKind = Literal["static", "compensator"]

WEIGHT_MARGIN = 1.1


class CompensatorWeights(NamedTuple):
    alpha: float
    beta: float
    chi: float


@dataclass(eq=False)
class ClosedLoop:
    """
    Augmented EVI of a regulated plant together with its error coordinates

    Args:
        system: The stacked EviSystem
        kind: static or compensator
        state_blocks: Name -> slice of the stacked state
        multiplier_blocks: Name -> slice of the stacked multiplier
        error_selector: E with e = E X (e_x first, then observer errors)
        error_drift: Drift of the error dynamics, E A_cl = error_drift E
        p_blocks: Certificates weighting the error blocks
        alpha, beta: Weights of the two error blocks in V
        design: The regulator design the loop was built from
    """
    system: EviSystem
    kind: LoopKind
    state_blocks: Dict[str, slice]
    multiplier_blocks: Dict[str, slice]
    error_selector: np.ndarray
    error_drift: np.ndarray
    p_blocks: Tuple[np.ndarray, ...]
    design: RegulatorDesign
    alpha: float = 1.0
    beta: float = 1.0
    plant_n: int = 0
    exo_n: int = 0
    pairs: List[Tuple[str, str]] = field(default_factory=list)

    @property
    def lyapunov_weight(self) -> np.ndarray:
        if len(self.p_blocks) == 1:
            return self.alpha * self.p_blocks[0]
        return block_diag(self.alpha * self.p_blocks[0], self.beta * self.p_blocks[1])

    def block(self, X: np.ndarray, name: str) -> np.ndarray:
        """State block of one sample or of a (k, N) sample array"""
        return np.asarray(X)[..., self.state_blocks[name]]

    def multiplier(self, Lam: np.ndarray, name: str) -> np.ndarray:
        return np.asarray(Lam)[..., self.multiplier_blocks[name]]

    def error(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X) @ self.error_selector.T

    def initial_state(
        self,
        x0: np.ndarray,
        x_r0: np.ndarray,
        x_hat0: Optional[np.ndarray] = None,
        x_hat_r0: Optional[np.ndarray] = None
    ) -> np.ndarray:
        """Stack initial conditions; the observer starts at zero unless given"""
        parts = [np.atleast_1d(np.asarray(x0, dtype=float)), np.atleast_1d(np.asarray(x_r0, dtype=float))]
        if self.kind == "compensator":
            parts.append(np.zeros(self.plant_n) if x_hat0 is None else np.atleast_1d(np.asarray(x_hat0, dtype=float)))
            parts.append(np.zeros(self.exo_n) if x_hat_r0 is None else np.atleast_1d(np.asarray(x_hat_r0, dtype=float)))
        X0 = np.concatenate(parts)
        if X0.shape != (self.system.n,):
            raise DimensionError(f"Initial state has {X0.size} entries, the closed loop has {self.system.n}")
        return X0


def _zeros_if_none(matrix: Optional[np.ndarray], shape: Tuple[int, int]) -> np.ndarray:
    return np.zeros(shape) if matrix is None else matrix


def _stacked_moving_set(*sets: MovingSet) -> MovingSet:
    bv = any(s.regularity == "right_continuous_bv" for s in sets)
    return MovingSet(
        cone=PolyhedralCone.product(*(s.cone for s in sets)),
        offset=stack_signals(*(s.offset for s in sets)),
        regularity="right_continuous_bv" if bv else "absolutely_continuous",
    )


def _slices(sizes: List[Tuple[str, int]]) -> Dict[str, slice]:
    blocks = {}
    start = 0
    for name, size in sizes:
        blocks[name] = slice(start, start + size)
        start += size
    return blocks


def _forcing_column(plant: EviSystem, exo: EviSystem, design: RegulatorDesign) -> Tuple[Optional[np.ndarray], Optional[np.ndarray]]:
    """Forcing columns (B N + B_ext, B_r), or (None, None) when nothing is forced"""
    f_ext = plant.f_ext if plant.f_ext is not None else exo.f_ext
    if f_ext is None:
        return None, None
    d_e = f_ext.dim
    plant_col = _zeros_if_none(plant.B_ext, (plant.n, d_e))
    if design.N is not None:
        plant_col = plant_col + plant.B @ design.N
    exo_col = _zeros_if_none(exo.B_ext, (exo.n, d_e))
    return plant_col, exo_col


def _check_pairing(plant: EviSystem, exo: EviSystem, design: RegulatorDesign):
    if plant.B is None:
        raise DimensionError(f"Plant {plant.name} has no input matrix B")
    if plant.C is None or exo.C is None:
        raise DimensionError("Plant and exosystem both need a regulation output C")
    n, d_r = design.Pi.shape
    if n != plant.n or d_r != exo.n:
        raise DimensionError(f"Pi is {design.Pi.shape}, plant/exosystem states are {plant.n}/{exo.n}")
    if design.K.shape != (plant.B.shape[1], n):
        raise DimensionError(f"K must be {plant.B.shape[1]}x{n}, got {design.K.shape}")


def _assert_block_diagonal(matrix: np.ndarray, row_sizes: List[int], col_sizes: List[int], name: str):
    r0 = 0
    for i, rows in enumerate(row_sizes):
        c0 = 0
        for j, cols in enumerate(col_sizes):
            if i != j and np.any(matrix[r0:r0 + rows, c0:c0 + cols] != 0):
                raise DimensionError(f"{name} lost its block-diagonal structure at block ({i}, {j})")
            c0 += cols
        r0 += rows


def build_static_loop(plant: EviSystem, exo: EviSystem, design: RegulatorDesign) -> ClosedLoop:
    """
    Stack plant and exosystem under u = K x + (M - K Pi) x_r (+ N f_ext)

    Args:
        plant: Plant with B, C and optionally F, B_ext, f_ext
        exo: Exosystem; its B_ext plays the role of B_r and its C of C_r
        design: Regulator design

    Returns:
        ClosedLoop with state (x, x_r) and error e = x - Pi x_r
    """
    _check_pairing(plant, exo, design)
    n, d_r = plant.n, exo.n
    B, K = plant.B, design.K
    F = _zeros_if_none(plant.F, (n, d_r))

    A_cl = np.block([
        [plant.A + B @ K, B @ design.reference_gain + F],
        [np.zeros((d_r, n)), exo.A],
    ])
    G_cl = block_diag(plant.G, exo.G)
    H_cl = block_diag(plant.H, exo.H)
    J_cl = block_diag(plant.J, exo.J)

    plant_col, exo_col = _forcing_column(plant, exo, design)
    f_ext = plant.f_ext if plant.f_ext is not None else exo.f_ext
    B_ext_cl = None if plant_col is None else np.vstack([plant_col, exo_col])

    system = EviSystem(
        A=A_cl,
        G=G_cl,
        H=H_cl,
        J=J_cl,
        moving_set=_stacked_moving_set(plant.moving_set, exo.moving_set),
        B_ext=B_ext_cl,
        f_ext=f_ext,
        C=np.hstack([plant.C, -exo.C]),
        name=f"{plant.name}-static",
    )

    E = np.hstack([np.eye(n), -design.Pi])
    logger.info(f"Assembled static closed loop {system.name}: n={system.n}, d={system.d}")
    return ClosedLoop(
        system=system,
        kind="static",
        state_blocks=_slices([("plant", n), ("exo", d_r)]),
        multiplier_blocks=_slices([("plant", plant.d), ("exo", exo.d)]),
        error_selector=E,
        error_drift=plant.A + B @ K,
        p_blocks=(design.P,),
        design=design,
        plant_n=n,
        exo_n=d_r,
        pairs=[("plant", "exo")],
    )


def observer_data(plant: EviSystem, exo: EviSystem) -> Tuple[np.ndarray, ...]:
    """
    (A_hat, C_hat, G_hat, H_hat, J_hat) of the joint plant/exosystem observer

    A_hat = [[A, F], [0, A_r]], C_hat = [C, -C_r] and block-diagonal G, H, J.
    """
    n, d_r = plant.n, exo.n
    F = _zeros_if_none(plant.F, (n, d_r))
    A_hat = np.block([[plant.A, F], [np.zeros((d_r, n)), exo.A]])
    C_hat = np.hstack([plant.C, -exo.C])
    return (
        A_hat,
        C_hat,
        block_diag(plant.G, exo.G),
        block_diag(plant.H, exo.H),
        block_diag(plant.J, exo.J),
    )


def compensator_weights(
    B: np.ndarray,
    design: RegulatorDesign,
    margin: float = WEIGHT_MARGIN
) -> CompensatorWeights:
    """
    Weights of V(e) = alpha e_x' P e_x + beta e_xi' P_hat e_xi

    alpha gamma sigma_min(P) > 1 and beta gamma_hat sigma_min(P_hat) > alpha^2 chi^2
    with chi = |P B W|_2, W = [-K, -(M - K Pi)]; both met with the factor margin.
    The sign follows u = K x_hat + (M - K Pi) x_hat_r = K x + (M - K Pi) x_r + W e_xi
    for e_xi = (x - x_hat, x_r - x_hat_r).
    """
    if design.P_hat is None or design.gamma_hat is None:
        raise DimensionError("Compensator weights need P_hat and gamma_hat")
    W = np.hstack([-design.K, -design.reference_gain])
    chi = float(np.linalg.norm(design.P @ B @ W, 2))
    sigma_p = float(np.min(np.linalg.eigvalsh(design.P)))
    sigma_hat = float(np.min(np.linalg.eigvalsh(design.P_hat)))
    alpha = margin / (design.gamma * sigma_p)
    beta = margin * alpha ** 2 * chi ** 2 / (design.gamma_hat * sigma_hat)
    return CompensatorWeights(alpha=alpha, beta=beta, chi=chi)


def build_compensator(
    plant: EviSystem,
    exo: EviSystem,
    K: np.ndarray,
    L: np.ndarray,
    design: RegulatorDesign
) -> ClosedLoop:
    """
    Close the loop through an observer of (x, x_r) driven by w = C x - C_r x_r

    Args:
        plant: Plant with B and C
        exo: Exosystem; its C is C_r and its B_ext is B_r
        K: State-feedback gain applied to the estimate
        L: (n + d_r) x d_w injection gain
        design: Regulator design (Pi, M, P, gamma and P_hat, gamma_hat)

    Returns:
        ClosedLoop with state (x, x_r, x_hat, x_hat_r), multipliers
        (eta, eta_r, eta_hat, eta_hat_r) and error
        e = (x - Pi x_r, x - x_hat, x_r - x_hat_r)

    Raises:
        DimensionError: inconsistent block sizes
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    L = np.atleast_2d(np.asarray(L, dtype=float))
    if design.P_hat is None or design.gamma_hat is None:
        raise DimensionError("The compensator needs an observer certificate (P_hat, gamma_hat)")
    design = replace(design, K=K, L=L)
    _check_pairing(plant, exo, design)
    n, d_r = plant.n, exo.n
    d_w = plant.C.shape[0]
    if L.shape != (n + d_r, d_w):
        raise DimensionError(f"L must be {n + d_r}x{d_w}, got {L.shape}")

    A_hat, C_hat, G_hat, H_hat, J_hat = observer_data(plant, exo)
    B = plant.B
    B_hat = np.vstack([B, np.zeros((d_r, B.shape[1]))])
    gain = np.hstack([K, design.reference_gain])
    LC = L @ C_hat

    # rows: plant, exosystem, observer; observer acts on xi_hat = (x_hat, x_hat_r)
    top = np.hstack([A_hat, B_hat @ gain])
    bottom = np.hstack([LC, A_hat + B_hat @ gain - LC])
    A_cl = np.vstack([top, bottom])

    G_cl = block_diag(plant.G, exo.G, plant.G, exo.G)
    H_cl = block_diag(plant.H, exo.H, plant.H, exo.H)
    J_cl = block_diag(plant.J, exo.J, plant.J, exo.J)
    rows = [plant.d, exo.d, plant.d, exo.d]
    cols = [plant.n, exo.n, plant.n, exo.n]
    _assert_block_diagonal(G_cl, cols, rows, "G_cl")
    _assert_block_diagonal(H_cl, rows, cols, "H_cl")
    _assert_block_diagonal(J_cl, rows, rows, "J_cl")

    plant_col, exo_col = _forcing_column(plant, exo, design)
    f_ext = plant.f_ext if plant.f_ext is not None else exo.f_ext
    B_ext_cl = None if plant_col is None else np.vstack([plant_col, exo_col, plant_col, exo_col])

    system = EviSystem(
        A=A_cl,
        G=G_cl,
        H=H_cl,
        J=J_cl,
        moving_set=_stacked_moving_set(plant.moving_set, exo.moving_set, plant.moving_set, exo.moving_set),
        B_ext=B_ext_cl,
        f_ext=f_ext,
        C=np.hstack([C_hat, np.zeros((d_w, n + d_r))]),
        name=f"{plant.name}-compensator",
    )

    I_n, I_r = np.eye(n), np.eye(d_r)
    E = np.block([
        [I_n, -design.Pi, np.zeros((n, n)), np.zeros((n, d_r))],
        [I_n, np.zeros((n, d_r)), -I_n, np.zeros((n, d_r))],
        [np.zeros((d_r, n)), I_r, np.zeros((d_r, n)), -I_r],
    ])
    W = np.hstack([-K, -design.reference_gain])
    error_drift = np.block([
        [plant.A + B @ K, B @ W],
        [np.zeros((n + d_r, n)), A_hat - LC],
    ])

    weights = compensator_weights(B, design)
    logger.info(
        f"Assembled compensator loop {system.name}: n={system.n}, d={system.d}, "
        f"alpha={weights.alpha:.4g}, beta={weights.beta:.4g}, chi={weights.chi:.4g}"
    )
    return ClosedLoop(
        system=system,
        kind="compensator",
        state_blocks=_slices([("plant", n), ("exo", d_r), ("observer", n), ("observer_exo", d_r)]),
        multiplier_blocks=_slices([
            ("plant", plant.d), ("exo", exo.d), ("observer", plant.d), ("observer_exo", exo.d),
        ]),
        error_selector=E,
        error_drift=error_drift,
        p_blocks=(design.P, design.P_hat),
        design=design,
        alpha=weights.alpha,
        beta=weights.beta,
        plant_n=n,
        exo_n=d_r,
        pairs=[("plant", "exo"), ("plant", "observer"), ("exo", "observer_exo")],
    )
