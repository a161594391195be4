"""
Scenario and convergence-table data types
"""
from dataclasses import dataclass, field, replace
from typing import List, Literal, Optional, Tuple

import numpy as np

from integrator import EviSystem
from regulation import ClosedLoop, RegulatorDesign, build_compensator, build_static_loop

ControllerKind = Literal["static", "compensator"]

OUTPUT_KINDS = ("trajectory", "error", "report")


@dataclass(eq=False)
class Scenario:
    """
    A regulated plant, its exosystem, the design closing the loop and run parameters

    Args:
        name: Identifier used for output directories
        plant: Plant EVI (B, C required; F, B_ext, f_ext optional)
        exo: Exosystem EVI; its C is C_r and its B_ext is B_r
        design: Regulator design
        x0, x_r0: Initial plant and exosystem states
        horizon, dt: Time parameters
        controller: static or compensator
        x_hat0, x_hat_r0: Optional observer initial states
        viability: Record u_eta = B^+ G eta in the error CSV
        description: One-line summary
        outputs: Subset of trajectory, error, report
    """
    name: str
    plant: EviSystem
    exo: EviSystem
    design: RegulatorDesign
    x0: np.ndarray
    x_r0: np.ndarray
    horizon: float
    dt: float
    controller: ControllerKind = "static"
    x_hat0: Optional[np.ndarray] = None
    x_hat_r0: Optional[np.ndarray] = None
    viability: bool = False
    description: str = ""
    outputs: Tuple[str, ...] = OUTPUT_KINDS

    def __post_init__(self):
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        self.x_r0 = np.atleast_1d(np.asarray(self.x_r0, dtype=float))
        if self.controller not in ("static", "compensator"):
            raise ValueError(f"Unknown controller kind: {self.controller}")
        unknown = set(self.outputs) - set(OUTPUT_KINDS)
        if unknown:
            raise ValueError(f"Unknown outputs: {sorted(unknown)}")

    def closed_loop(self) -> ClosedLoop:
        if self.controller == "compensator":
            return build_compensator(self.plant, self.exo, self.design.K, self.design.L, self.design)
        return build_static_loop(self.plant, self.exo, self.design)

    def initial_state(self, loop: ClosedLoop) -> np.ndarray:
        return loop.initial_state(self.x0, self.x_r0, self.x_hat0, self.x_hat_r0)

    def with_overrides(self, dt: Optional[float] = None, horizon: Optional[float] = None) -> "Scenario":
        changes = {}
        if dt is not None:
            changes["dt"] = float(dt)
        if horizon is not None:
            changes["horizon"] = float(horizon)
        return replace(self, **changes) if changes else self


@dataclass
class ConvergenceTable:
    """
    Grid-refinement study of one scenario

    errors[i] is the largest state error of the dt_values[i] run against the
    reference run over the common grid, jump samples excluded.
    """
    scenario: str
    dt_values: List[float]
    errors: List[float]
    terminal_errors: List[float]
    reference_dt: float
    order: float = float("nan")
    slope: float = float("nan")
    richardson: List[float] = field(default_factory=list)
    error: Optional[str] = None

    def __post_init__(self):
        if any(b >= a for a, b in zip(self.dt_values, self.dt_values[1:])):
            raise ValueError("dt values must be strictly decreasing")
        if any(e < 0 for e in self.errors):
            raise ValueError("errors must be nonnegative")

    def rows(self) -> List[Tuple[float, float, float]]:
        return list(zip(self.dt_values, self.errors, self.terminal_errors))
