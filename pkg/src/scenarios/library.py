"""
Builtin scenarios

clipped_sine        viability of |x2| <= 1 while tracking a clipped oscillation
clipped_sine_bv     the same with the clipping level dropping to 0.8 at t = 10
diode_circuit       RLC circuit with a diode tracking a staircase source
saturated_observer  output-feedback compensator for a saturated scalar loop
linear_decay        x' = -x behind an inactive constraint
"""
import logging
from typing import Callable, Dict, List

import numpy as np

from geometry import ConstantSignal, ExpressionSignal, MovingSet, PolyhedralCone, StaircaseSignal, Term
from integrator import EviSystem
from regulation import RegulatorDesign, bisect_gamma, observer_data, regulator_residual, viability_input_matrix
from .model import Scenario

logger = logging.getLogger(__name__)

# diode circuit component values
RESISTANCE = 10.0
INDUCTANCE = 1e-3
CAPACITANCE = 1e-2


def _design(plant: EviSystem, exo: EviSystem, Pi, M_ff, K, P, **extra) -> RegulatorDesign:
    """Attach the largest certified gamma and the regulator residual to printed gains"""
    K = np.atleast_2d(np.asarray(K, dtype=float))
    P = np.atleast_2d(np.asarray(P, dtype=float))
    Pi = np.atleast_2d(np.asarray(Pi, dtype=float))
    M_ff = np.atleast_2d(np.asarray(M_ff, dtype=float))
    gamma = bisect_gamma(plant.A + plant.B @ K, plant.G, plant.H, plant.J, P)
    residual = regulator_residual(plant.A, plant.B, plant.F, exo.A, plant.C, exo.C, plant.H, exo.H, Pi, M_ff)
    return RegulatorDesign(Pi=Pi, M_ff=M_ff, K=K, P=P, gamma=gamma, residual=residual, **extra)


def _clipped_sine(name: str, moving_set: MovingSet, description: str) -> Scenario:
    B = np.array([[0.0], [1.0]])
    H = np.array([[0.0, -1.0], [0.0, 1.0]])
    G = viability_input_matrix(B, H)
    C = np.array([[0.0, 1.0]])

    plant = EviSystem(
        A=np.array([[-0.1, 1.0], [0.0, 0.0]]),
        G=G,
        H=H,
        J=np.zeros((2, 2)),
        moving_set=moving_set,
        B=B,
        C=C,
        name=name,
    )
    exo = EviSystem(
        A=np.array([[-0.1, 1.0], [-2.0, 1.0]]),
        G=G,
        H=H,
        J=np.zeros((2, 2)),
        moving_set=moving_set,
        C=C,
        name=f"{name}-reference",
    )
    design = _design(
        plant, exo,
        Pi=np.eye(2),
        M_ff=[[-2.0, 1.0]],
        K=[[-2.0, -2.0]],
        P=np.diag([2.0, 1.0]),
    )
    return Scenario(
        name=name,
        plant=plant,
        exo=exo,
        design=design,
        x0=[1.0, 0.0],
        x_r0=[0.0, 0.5],
        horizon=20.0,
        dt=1e-3,
        viability=True,
        description=description,
    )


def clipped_sine() -> Scenario:
    moving_set = MovingSet(PolyhedralCone.orthant(2), ConstantSignal([1.0, 1.0]))
    return _clipped_sine("clipped_sine", moving_set, "viability of |x2| <= 1 tracking a clipped oscillation")


def clipped_sine_bv() -> Scenario:
    level = StaircaseSignal(times=[0.0, 10.0], values=[[1.0, 1.0], [0.8, 0.8]])
    moving_set = MovingSet(PolyhedralCone.orthant(2), level, regularity="right_continuous_bv")
    return _clipped_sine("clipped_sine_bv", moving_set, "clipping level drops from 1 to 0.8 at t = 10")


def diode_circuit() -> Scenario:
    R, L, C = RESISTANCE, INDUCTANCE, CAPACITANCE
    source = ExpressionSignal([[Term("floor", gain=1.0, rate=10.0)]])
    offset = ExpressionSignal([[Term("floor", gain=1.0 / R, rate=10.0)]])
    moving_set = MovingSet(PolyhedralCone.orthant(1), offset, regularity="right_continuous_bv")

    plant = EviSystem(
        A=np.array([[-1.0 / (R * C), -1.0], [1.0 / (L * C), 0.0]]),
        G=np.array([[1.0 / R], [0.0]]),
        H=np.array([[-1.0 / (R * C), 0.0]]),
        J=np.array([[1.0 / R]]),
        moving_set=moving_set,
        B=np.array([[0.0], [-1.0 / L]]),
        B_ext=np.array([[1.0 / R], [0.0]]),
        f_ext=source,
        C=np.array([[1.0, 0.0]]),
        name="diode_circuit",
    )
    exo = EviSystem(
        A=np.array([[-1.0 / (R * C)]]),
        G=np.array([[1.0 / R]]),
        H=np.array([[-1.0 / (R * C)]]),
        J=np.array([[1.0 / R]]),
        moving_set=moving_set,
        B_ext=np.array([[1.0 / R]]),
        f_ext=source,
        C=np.array([[1.0]]),
        name="diode_circuit-reference",
    )
    design = _design(
        plant, exo,
        Pi=[[1.0], [0.0]],
        M_ff=[[1.0 / C]],
        K=[[-1000.0, 5.0]],
        P=[[2240.9, -4.4029], [-4.4029, 0.0137]],
        N=np.zeros((1, 1)),
    )
    return Scenario(
        name="diode_circuit",
        plant=plant,
        exo=exo,
        design=design,
        x0=[-0.01, 0.0],
        x_r0=[0.0],
        horizon=2.0,
        dt=1e-3,
        description="capacitor charge tracks a diode-clipped staircase reference",
    )


def saturated_observer() -> Scenario:
    moving_set = MovingSet(PolyhedralCone.orthant(2), ConstantSignal([1.0, 1.0]))
    B = np.array([[1.0]])
    H = np.array([[-1.0], [1.0]])
    G = viability_input_matrix(B, H)

    plant = EviSystem(
        A=np.array([[-1.0]]),
        G=G,
        H=H,
        J=np.zeros((2, 2)),
        moving_set=moving_set,
        B=B,
        C=np.array([[1.0]]),
        name="saturated_observer",
    )
    exo = EviSystem(
        A=np.array([[0.5]]),
        G=G,
        H=H,
        J=np.zeros((2, 2)),
        moving_set=moving_set,
        C=np.array([[1.0]]),
        name="saturated_observer-reference",
    )

    L = np.array([[0.0], [-2.0]])
    P_hat = np.eye(2)
    A_hat, C_hat, G_hat, H_hat, J_hat = observer_data(plant, exo)
    gamma_hat = bisect_gamma(A_hat - L @ C_hat, G_hat, H_hat, J_hat, P_hat)
    design = _design(
        plant, exo,
        Pi=[[1.0]],
        M_ff=[[1.5]],
        K=[[-2.0]],
        P=[[1.0]],
        L=L,
        P_hat=P_hat,
        gamma_hat=gamma_hat,
    )
    return Scenario(
        name="saturated_observer",
        plant=plant,
        exo=exo,
        design=design,
        x0=[0.0],
        x_r0=[0.2],
        horizon=20.0,
        dt=1e-3,
        controller="compensator",
        viability=True,
        description="output feedback tracking of a saturating unstable reference",
    )


def linear_decay() -> Scenario:
    moving_set = MovingSet(PolyhedralCone.orthant(1), ConstantSignal([10.0]))
    one = np.array([[1.0]])
    plant = EviSystem(
        A=-one, G=one, H=one, J=np.zeros((1, 1)), moving_set=moving_set, B=one, C=one, name="linear_decay",
    )
    exo = EviSystem(
        A=-one, G=one, H=one, J=np.zeros((1, 1)), moving_set=moving_set, C=one, name="linear_decay-reference",
    )
    design = _design(plant, exo, Pi=one, M_ff=[[0.0]], K=[[0.0]], P=one)
    return Scenario(
        name="linear_decay",
        plant=plant,
        exo=exo,
        design=design,
        x0=[1.0],
        x_r0=[0.0],
        horizon=2.0,
        dt=1e-2,
        description="x' = -x behind the inactive constraint x >= -10",
    )


BUILTIN_SCENARIOS: Dict[str, Callable[[], Scenario]] = {
    "clipped_sine": clipped_sine,
    "clipped_sine_bv": clipped_sine_bv,
    "diode_circuit": diode_circuit,
    "saturated_observer": saturated_observer,
    "linear_decay": linear_decay,
}


def builtin_names() -> List[str]:
    return sorted(BUILTIN_SCENARIOS)


def get_builtin(name: str) -> Scenario:
    """
    Build a builtin scenario by name

    Raises:
        KeyError: unknown name
    """
    try:
        factory = BUILTIN_SCENARIOS[name]
    except KeyError:
        raise KeyError(f"Unknown builtin scenario '{name}' (known: {', '.join(builtin_names())})") from None
    logger.debug(f"Building builtin scenario {name}")
    return factory()
