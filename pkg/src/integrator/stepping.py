"""
Catching-up time stepping, the BV jump map and the simulation loop

Each step is implicit in the linear drift and enforces the constraint at the
end of the step:

    x_hat  = (I - dt A)^-1 (x + dt forcing(t, x))
    eta    solves  K ∋ (J + dt H W G) eta + H x_hat + h(t + dt) ⟂ eta ∈ K*
    x_next = x_hat + dt W G eta,   W = (I - dt A)^-1
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from geometry import MovingSet, PiecewiseLinearSignal
from geometry.signals import SNAP_RTOL
from lcp import solve_cone_lcp
from lcp.cone_cp import ASSUMPTION_HINT, Method
from utils.errors import AssumptionViolation, ComplementarityError, DimensionError, EviError, SimulationError, StepSizeError
from .system import EviSystem, JumpRecord, Trajectory

logger = logging.getLogger(__name__)

# (I - dt A) with a larger condition number is treated as singular
COND_LIMIT = 1e12


@dataclass(frozen=True)
class StepOperator:
    """Factorization and matrices reused by every step of a fixed dt"""
    dt: float
    lu: tuple
    WG: np.ndarray
    M_step: np.ndarray


def prepare_step(system: EviSystem, dt: float) -> StepOperator:
    """
    Factor I - dt A for a fixed step size

    Raises:
        StepSizeError: dt not positive/finite or I - dt A (numerically) singular
    """
    if not np.isfinite(dt) or dt <= 0:
        raise StepSizeError(f"Step size must be positive and finite, got {dt}")

    I_minus = np.eye(system.n) - dt * system.A
    cond = np.linalg.cond(I_minus)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise StepSizeError(f"I - dt*A is singular for dt={dt} (condition number {cond:.3e})")

    lu = lu_factor(I_minus)
    WG = lu_solve(lu, system.G)
    M_step = system.J + dt * system.H @ WG
    return StepOperator(dt=dt, lu=lu, WG=WG, M_step=M_step)


def step(
    system: EviSystem,
    t: float,
    x: np.ndarray,
    dt: float,
    operator: Optional[StepOperator] = None,
    h_next: Optional[np.ndarray] = None,
    method: Method = "auto",
    tol: float = 1e-9
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Advance one step from (t, x)

    Args:
        system: The EVI
        t: Current time
        x: Current state
        dt: Step size
        operator: Prepared factorization for this dt (built when omitted)
        h_next: Offset to enforce at t + dt (defaults to h((t + dt)-))
        method: Cone CP solver choice
        tol: Cone CP tolerance

    Returns:
        (x_next, eta)

    Raises:
        StepSizeError: bad dt
        ComplementarityError: the step cone CP has no solution
    """
    op = operator if operator is not None and operator.dt == dt else prepare_step(system, dt)
    x = np.asarray(x, dtype=float)
    if x.shape != (system.n,):
        raise DimensionError(f"State has shape {x.shape}, system {system.name} has n={system.n}")

    t_next = t + dt
    if h_next is None:
        h_next = system.moving_set.h_left(t_next)

    x_hat = lu_solve(op.lu, x + dt * system.forcing(t, x))
    result = solve_cone_lcp(system.moving_set.cone, op.M_step, system.H @ x_hat + h_next, method=method, tol=tol)
    if not result.solved:
        raise ComplementarityError(
            f"step cone CP failed ({result.method}): {result.error}",
            status=result.status,
            hint=ASSUMPTION_HINT,
        )

    x_next = x_hat + dt * op.WG @ result.eta
    return x_next, result.eta


@dataclass
class JumpOutcome:
    x_plus: np.ndarray
    eta: np.ndarray
    jumped: bool


def resolve_jump(
    system: EviSystem,
    t: float,
    x_minus: np.ndarray,
    method: Method = "auto",
    tol: float = 1e-9
) -> JumpOutcome:
    """
    Static cone CP at (t, x-) when solvable, the impulsive one otherwise

    The impulsive problem is x+ = x- + G eta with K ∋ H x+ + J eta + h(t) ⟂ eta ∈ K*,
    i.e. the cone CP with matrix J + H G.

    Raises:
        AssumptionViolation: no admissible x+ exists (A3)
    """
    x_minus = np.asarray(x_minus, dtype=float)
    cone = system.moving_set.cone
    q = system.H @ x_minus + system.moving_set.h(t)

    static = solve_cone_lcp(cone, system.J, q, method=method, tol=tol)
    if static.solved:
        return JumpOutcome(x_plus=x_minus.copy(), eta=static.eta, jumped=False)

    impulse = solve_cone_lcp(cone, system.J + system.H @ system.G, q, method=method, tol=tol)
    if not impulse.solved:
        raise AssumptionViolation(
            f"no admissible post-jump state at t={t}: {impulse.error}",
            assumption="A3",
        )

    x_plus = x_minus + system.G @ impulse.eta
    logger.debug(f"Jump at t={t:.10g} of size {np.linalg.norm(x_plus - x_minus):.3e}")
    return JumpOutcome(x_plus=x_plus, eta=impulse.eta, jumped=True)


def jump_map(
    system: EviSystem,
    t: float,
    x_minus: np.ndarray,
    method: Method = "auto",
    tol: float = 1e-9
) -> np.ndarray:
    """
    Post-jump state x+ for a jump of h at t (x- unchanged when already admissible)

    For G = H = I and J = 0 this is the projection of x- onto S(t).
    """
    return resolve_jump(system, t, x_minus, method=method, tol=tol).x_plus


def _sample_residual(system: EviSystem, v: np.ndarray, eta: np.ndarray) -> float:
    cone = system.moving_set.cone
    scale = max(1.0, float(np.max(np.abs(v))) if v.size else 1.0)
    return max(cone.primal_violation(v), cone.dual_violation(eta), abs(float(eta @ v))) / scale


def simulate(
    system: EviSystem,
    x0: np.ndarray,
    t_end: float,
    dt: float,
    t0: float = 0.0,
    method: Method = "auto",
    tol: float = 1e-9,
    traj_tol: float = 1e-6
) -> Trajectory:
    """
    Integrate the EVI on a uniform grid from t0 to t_end

    An inadmissible x0 is first moved by the jump map (recorded as an initial
    jump). Breakpoints of a BV offset trigger the jump map at the grid time
    that closes their step.

    Args:
        system: The EVI
        x0: Initial state
        t_end: Final time
        dt: Step size
        t0: Initial time
        method: Cone CP solver choice
        tol: Cone CP tolerance
        traj_tol: Per-sample residual tolerance (violations are logged)

    Returns:
        Trajectory

    Raises:
        SimulationError: any failure, tagged with the time it happened
    """
    if t_end <= t0:
        raise StepSizeError(f"t_end={t_end} must exceed t0={t0}")
    span = t_end - t0
    n_steps = int(round(span / dt))
    if n_steps < 1 or abs(n_steps * dt - span) > 1e-9 * max(1.0, span):
        raise StepSizeError(f"Horizon {span} is not an integer multiple of dt={dt}")

    operator = prepare_step(system, dt)
    x = np.asarray(x0, dtype=float)
    if x.shape != (system.n,):
        raise DimensionError(f"Initial state has shape {x.shape}, system {system.name} has n={system.n}")

    times = t0 + dt * np.arange(n_steps + 1)
    states = np.zeros((n_steps + 1, system.n))
    multipliers = np.zeros((n_steps + 1, system.d))
    values = np.zeros((n_steps + 1, system.d))
    flags = np.zeros(n_steps + 1, dtype=bool)
    jumps = []
    worst = 0.0

    logger.info(f"Simulating {system.name}: n={system.n}, d={system.d}, dt={dt:g}, steps={n_steps}")

    try:
        outcome = resolve_jump(system, t0, x, method=method, tol=tol)
    except EviError as e:
        raise SimulationError(str(e), t=t0) from e
    if outcome.jumped:
        logger.info(f"Initial state of {system.name} is inadmissible, resolved by one jump")
        jumps.append(JumpRecord(t0, x.copy(), outcome.x_plus.copy()))
        flags[0] = True
    x = outcome.x_plus
    states[0] = x
    multipliers[0] = outcome.eta
    values[0] = system.constraint_value(x, outcome.eta, t0)

    moving_set = system.moving_set
    for k in range(n_steps):
        t, t_next = times[k], times[k + 1]
        breakpoints = moving_set.breakpoints(t, t_next)
        h_next = None
        if breakpoints:
            tau = breakpoints[0]
            if abs(tau - t_next) > SNAP_RTOL * max(1.0, abs(t_next)):
                logger.warning(f"Breakpoint t={tau:.10g} snapped to grid time {t_next:.10g}")
                h_next = moving_set.h_left(tau)

        try:
            x_next, eta = step(system, t, x, dt, operator, h_next=h_next, method=method, tol=tol)
            if breakpoints:
                outcome = resolve_jump(system, t_next, x_next, method=method, tol=tol)
                if outcome.jumped:
                    jumps.append(JumpRecord(float(t_next), x_next.copy(), outcome.x_plus.copy()))
                    flags[k + 1] = True
                x_next, eta = outcome.x_plus, outcome.eta
                v = system.constraint_value(x_next, eta, t_next)
            elif h_next is None:
                v = system.constraint_value(x_next, eta, t_next, left=True)
            else:
                v = system.H @ x_next + system.J @ eta + h_next
        except EviError as e:
            raise SimulationError(str(e), t=float(t_next)) from e

        if not np.all(np.isfinite(x_next)):
            raise SimulationError("state became non-finite", t=float(t_next))

        residual = _sample_residual(system, v, eta)
        if residual > traj_tol:
            logger.warning(f"Sample residual {residual:.3e} above {traj_tol:g} at t={t_next:.10g}")
        worst = max(worst, residual)

        x = x_next
        states[k + 1] = x
        multipliers[k + 1] = eta
        values[k + 1] = v

    traj = Trajectory(
        times=times,
        states=states,
        multipliers=multipliers,
        constraint_values=values,
        jumps=jumps,
        jump_flags=flags,
        dt=dt,
        name=system.name,
        max_residual=worst,
    )
    traj.lipschitz = lipschitz_estimate(traj)
    logger.info(
        f"Finished {system.name}: {len(jumps)} jumps, max residual {worst:.3e}, "
        f"Lipschitz estimate {traj.lipschitz:.6g}"
    )
    return traj


def lipschitz_estimate(traj: Trajectory) -> float:
    """Largest finite-difference slope between consecutive samples not separated by a jump"""
    if len(traj) < 2:
        raise ValueError("Lipschitz estimate needs at least two samples")
    dx = np.linalg.norm(np.diff(traj.states, axis=0), axis=1)
    dt = np.diff(traj.times)
    keep = ~traj.jump_flags[1:]
    if not np.any(keep):
        return 0.0
    return float(np.max(dx[keep] / dt[keep]))


def ramp_jump_oracle(
    system: EviSystem,
    t: float,
    x_minus: np.ndarray,
    width: float = 1e-6,
    substeps: int = 200
) -> np.ndarray:
    """
    State reached by replacing the jump of h at t with a linear ramp of the given width

    As width -> 0 this converges to jump_map(system, t, x_minus).
    """
    moving_set = system.moving_set
    ramp = PiecewiseLinearSignal([t, t + width], [moving_set.h_left(t), moving_set.h(t)])
    ramp_system = system.with_moving_set(MovingSet(moving_set.cone, ramp, "absolutely_continuous"))
    traj = simulate(ramp_system, x_minus, t + width, width / substeps, t0=t)
    return traj.final_state
