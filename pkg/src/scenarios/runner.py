"""
Scenario runs, convergence studies and design verification
"""
import asyncio
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.optimize import curve_fit

from integrator import Trajectory, check_assumptions, simulate, write_trajectory_csv
from regulation import (
    ClosedLoop,
    ErrorTrajectory,
    LyapunovVerdict,
    bisect_gamma,
    check_strict_passivity,
    error_trajectory,
    feedforward_match,
    lyapunov_decrease_check,
    max_cross_term,
    observer_data,
    regulator_residual,
    stacked_quadruple,
    static_control,
    viability_control,
)
from utils.errors import DimensionError, StepSizeError
from utils.settings import Settings
from .loader import REGULATOR_TOL, load_design_file, load_scenario
from .model import ConvergenceTable, Scenario
from .report import ReportItems, convergence_items, write_error_csv, write_report

logger = logging.getLogger(__name__)

REFERENCE_REFINEMENT = 4


@dataclass(eq=False)
class RunResult:
    """Everything a scenario run produced; files maps output kind to path"""
    name: str
    scenario: Scenario
    loop: ClosedLoop
    trajectory: Trajectory
    errors: ErrorTrajectory
    verdict: LyapunovVerdict
    w: np.ndarray
    u_eta: Optional[np.ndarray]
    items: ReportItems
    files: Dict[str, Path] = field(default_factory=dict)
    u_eta_feedback: Optional[np.ndarray] = None

    def item(self, key: str):
        return dict(self.items)[key]


@dataclass
class DesignVerification:
    """Outcome of re-verifying a design file"""
    name: str
    passed: bool
    items: ReportItems
    failures: List[str] = field(default_factory=list)
    error: Optional[str] = None


def _resolve(scenario: Union[str, Path, Scenario], settings: Settings) -> Scenario:
    if isinstance(scenario, Scenario):
        return scenario
    return load_scenario(scenario, tol=settings.tol)


def viability_inputs(scenario: Scenario, loop: ClosedLoop, traj: Trajectory) -> np.ndarray:
    """u_eta = B^+ G eta on every sample, eta being the plant multiplier"""
    eta = loop.multiplier(traj.multipliers, "plant")
    channel = np.linalg.pinv(scenario.plant.B) @ scenario.plant.G
    return eta @ channel.T


def viability_feedback(scenario: Scenario, loop: ClosedLoop, traj: Trajectory, tol: float = 1e-9) -> np.ndarray:
    """
    u_eta from the active-face LCP at every sample

    The regulating input is the one the loop applies: the state feedback for
    a static loop, the feedback of the estimates for a compensator.
    """
    plant, design = scenario.plant, scenario.design
    x = loop.block(traj.states, "plant")
    x_r = loop.block(traj.states, "exo")
    if loop.kind == "compensator":
        x_fb, x_r_fb = loop.block(traj.states, "observer"), loop.block(traj.states, "observer_exo")
    else:
        x_fb, x_r_fb = x, x_r
    f_ext = plant.f_ext if plant.f_ext is not None else scenario.exo.f_ext

    inputs = np.zeros((len(traj), plant.B.shape[1]))
    for k, t in enumerate(traj.times):
        forcing = f_ext(t) if f_ext is not None else None
        u_reg = static_control(design, x_fb[k], x_r_fb[k], forcing)
        inputs[k] = viability_control(plant, x[k], u_reg, x_r[k], float(t), tol=tol)
    return inputs


def viability_gap(recorded: np.ndarray, feedback: np.ndarray, jump_flags: np.ndarray) -> float:
    """
    Largest difference of the two viability inputs inside sliding segments

    A sample counts when the feedback input is nonzero on it and on both
    neighbours and no jump happened there; the recorded multiplier of the step
    that first reaches the boundary only covers part of that step.
    """
    active = np.any(feedback != 0.0, axis=1)
    inside = np.zeros(len(active), dtype=bool)
    inside[1:-1] = active[:-2] & active[1:-1] & active[2:]
    inside &= ~jump_flags
    if not np.any(inside):
        return 0.0
    return float(np.max(np.abs(recorded[inside] - feedback[inside])))


def _max_violation(loop: ClosedLoop, traj: Trajectory) -> float:
    cone = loop.system.moving_set.cone
    return max(cone.primal_violation(v) for v in traj.constraint_values)


def _report_items(scenario: Scenario, loop: ClosedLoop, traj: Trajectory, verdict: LyapunovVerdict,
                  w: np.ndarray, settings: Settings) -> ReportItems:
    design = scenario.design
    plant = scenario.plant
    items: ReportItems = [
        ("scenario", scenario.name),
        ("controller", scenario.controller),
        ("dt", scenario.dt),
        ("horizon", scenario.horizon),
        ("steps", len(traj) - 1),
        ("jumps", len(traj.jumps)),
    ]

    assumptions = check_assumptions(plant, design.P, seed=settings.seed, tol=settings.tol)
    for check in assumptions.checks():
        items.append((f"assumption.{check.name}", check.passed))
        items.append((f"assumption.{check.name}.margin", check.margin))

    _, margin = check_strict_passivity(plant.A + plant.B @ design.K, plant.G, plant.H, plant.J, design.P, design.gamma)
    items.extend([
        ("regulator.residual", design.residual),
        ("passivity.gamma", design.gamma),
        ("passivity.margin", margin),
    ])
    if design.L is not None:
        A_hat, C_hat, G_hat, H_hat, J_hat = observer_data(plant, scenario.exo)
        _, obs_margin = check_strict_passivity(
            A_hat - design.L @ C_hat, G_hat, H_hat, J_hat, design.P_hat, design.gamma_hat
        )
        items.extend([
            ("observer.gamma", design.gamma_hat),
            ("observer.margin", obs_margin),
            ("lyapunov.alpha", loop.alpha),
            ("lyapunov.beta", loop.beta),
        ])

    items.extend([
        ("max_constraint_violation", _max_violation(loop, traj)),
        ("max_sample_residual", traj.max_residual),
        ("terminal_tracking_error", float(np.linalg.norm(w[-1]))),
        ("lyapunov.monotone", verdict.monotone),
        ("lyapunov.worst_increase", verdict.worst_increase),
        ("lyapunov.jump_violations", verdict.jump_violations),
        ("monotonicity.max_cross_term", max_cross_term(traj, loop.multiplier_blocks, loop.pairs)),
        ("lipschitz_estimate", traj.lipschitz),
    ])
    return items


def run_scenario(
    scenario: Union[str, Path, Scenario],
    dt: Optional[float] = None,
    horizon: Optional[float] = None,
    out_dir: Optional[Union[str, Path]] = None,
    settings: Optional[Settings] = None,
    write: bool = True
) -> RunResult:
    """
    Simulate a scenario's closed loop and emit trajectory CSV, error CSV and report

    Args:
        scenario: Builtin name, scenario file path or Scenario
        dt, horizon: Overrides of the scenario's time parameters
        out_dir: Output root; files go to <out_dir>/<scenario name>/
        settings: Tolerances and seed (defaults from the environment)
        write: Write the requested outputs

    Returns:
        RunResult

    Raises:
        ScenarioValidationError: the scenario does not validate
        SimulationError: the integration failed, with its time stamp
    """
    settings = settings or Settings.from_env()
    scenario = _resolve(scenario, settings).with_overrides(dt=dt, horizon=horizon)
    logger.info(f"Running scenario {scenario.name} (dt={scenario.dt:g}, horizon={scenario.horizon:g})")
    started = time.perf_counter()

    loop = scenario.closed_loop()
    traj = simulate(
        loop.system,
        scenario.initial_state(loop),
        scenario.horizon,
        scenario.dt,
        tol=settings.tol,
        traj_tol=settings.traj_tol,
    )
    errors = error_trajectory(traj, loop.error_selector)
    verdict = lyapunov_decrease_check(errors, loop.p_blocks, loop.alpha, loop.beta, tol=settings.traj_tol)
    w = traj.states @ loop.system.C.T
    u_eta = u_eta_feedback = None
    items = _report_items(scenario, loop, traj, verdict, w, settings)
    if scenario.viability:
        u_eta = viability_inputs(scenario, loop, traj)
        u_eta_feedback = viability_feedback(scenario, loop, traj, tol=settings.tol)
        items.append(("viability.feedback_gap", viability_gap(u_eta, u_eta_feedback, traj.jump_flags)))

    result = RunResult(
        name=scenario.name,
        scenario=scenario,
        loop=loop,
        trajectory=traj,
        errors=errors,
        verdict=verdict,
        w=w,
        u_eta=u_eta,
        items=items,
        u_eta_feedback=u_eta_feedback,
    )

    if write:
        target = Path(out_dir if out_dir is not None else settings.output_dir) / scenario.name
        target.mkdir(parents=True, exist_ok=True)
        if "trajectory" in scenario.outputs:
            result.files["trajectory"] = write_trajectory_csv(traj, target / "trajectory.csv")
        if "error" in scenario.outputs:
            weight_values = verdict.values
            result.files["error"] = write_error_csv(
                target / "error.csv", traj.times, w, errors.errors, weight_values, traj.jump_flags, u_eta
            )
        if "report" in scenario.outputs:
            result.files["report"] = write_report(target / "report.txt", items)

    logger.info(f"Scenario {scenario.name} finished in {time.perf_counter() - started:.2f}s")
    return result


def _run_by_name(name: str, kwargs: dict) -> RunResult:
    return run_scenario(name, **kwargs)


async def run_many_async(names: Sequence[str], jobs: int = 1, **kwargs) -> List[Union[RunResult, Exception]]:
    """Run several scenarios, up to jobs at a time in worker processes"""
    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=max(1, jobs)) as pool:
        tasks = [loop.run_in_executor(pool, _run_by_name, name, kwargs) for name in names]
        results = await asyncio.gather(*tasks, return_exceptions=True)
    for name, result in zip(names, results):
        if isinstance(result, Exception):
            logger.error(f"Scenario {name} failed: {result}")
    return list(results)


def run_many(names: Sequence[str], jobs: int = 1, **kwargs) -> List[Union[RunResult, Exception]]:
    """Sequential for jobs <= 1, otherwise one worker process per running scenario"""
    if jobs <= 1:
        results = []
        for name in names:
            try:
                results.append(run_scenario(name, **kwargs))
            except Exception as e:
                logger.error(f"Scenario {name} failed: {e}", exc_info=True)
                results.append(e)
        return results
    return asyncio.run(run_many_async(names, jobs=jobs, **kwargs))


def _check_dt_list(dt_values: Sequence[float]) -> List[float]:
    dts = sorted((float(dt) for dt in dt_values), reverse=True)
    if len(dts) < 3:
        raise StepSizeError(f"A convergence study needs at least 3 step sizes, got {len(dts)}")
    if any(dt <= 0 for dt in dts) or len(set(dts)) != len(dts):
        raise StepSizeError("Step sizes must be positive and distinct")
    smallest = dts[-1]
    for dt in dts:
        ratio = dt / smallest
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise StepSizeError(f"dt={dt:g} is not an integer multiple of the smallest step {smallest:g}")
    return dts


def _on_grid(traj: Trajectory, spacing: float) -> np.ndarray:
    stride = int(round(spacing / traj.dt))
    return np.arange(0, len(traj), stride)


def _grid_error(a: Trajectory, b: Trajectory, spacing: float) -> float:
    """Largest state difference on the common grid, skipping samples where either run jumped"""
    ia, ib = _on_grid(a, spacing), _on_grid(b, spacing)
    if len(ia) != len(ib):
        raise DimensionError("Runs do not share the common grid")
    keep = ~(a.jump_flags[ia] | b.jump_flags[ib])
    if not np.any(keep):
        return 0.0
    diff = np.linalg.norm(a.states[ia][keep] - b.states[ib][keep], axis=1)
    return float(np.max(diff))


def _fit_order(dts: np.ndarray, errors: np.ndarray, dt_ref: float):
    def model(dt, c, p):
        return c * (dt ** p - dt_ref ** p)

    (c, p), _ = curve_fit(model, dts, errors, p0=(errors[0] / dts[0], 1.0), maxfev=10000)
    return float(p)


def convergence_study(
    scenario: Union[str, Path, Scenario],
    dt_values: Sequence[float],
    horizon: Optional[float] = None,
    settings: Optional[Settings] = None
) -> ConvergenceTable:
    """
    Grid-refinement study against a reference run at min(dt) / 4

    Args:
        scenario: Builtin name, scenario file or Scenario
        dt_values: At least three step sizes, each an integer multiple of the smallest
        horizon: Optional horizon override
        settings: Tolerances

    Returns:
        ConvergenceTable with errors, fitted order, log-log slope and Richardson ratios

    Raises:
        StepSizeError: invalid step list
    """
    settings = settings or Settings.from_env()
    dts = _check_dt_list(dt_values)
    base = _resolve(scenario, settings).with_overrides(horizon=horizon)
    dt_ref = dts[-1] / REFERENCE_REFINEMENT
    logger.info(f"Convergence study of {base.name}: dt={dts}, reference dt={dt_ref:g}")

    def run(dt: float) -> Trajectory:
        loop = base.closed_loop()
        return simulate(loop.system, base.initial_state(loop), base.horizon, dt,
                        tol=settings.tol, traj_tol=settings.traj_tol)

    reference = run(dt_ref)
    runs = [run(dt) for dt in dts]
    spacing = dts[0]
    errors = [_grid_error(traj, reference, spacing) for traj in runs]
    terminal = [float(np.linalg.norm(traj.final_state - reference.final_state)) for traj in runs]

    richardson = []
    for a, b, c, dt_a, dt_b in zip(runs, runs[1:], runs[2:], dts, dts[1:]):
        d1, d2 = _grid_error(a, b, spacing), _grid_error(b, c, spacing)
        if d1 > 0 and d2 > 0:
            richardson.append(float(np.log(d1 / d2) / np.log(dt_a / dt_b)))

    table = ConvergenceTable(
        scenario=base.name,
        dt_values=dts,
        errors=errors,
        terminal_errors=terminal,
        reference_dt=dt_ref,
        richardson=richardson,
    )
    err = np.asarray(errors)
    if np.any(err <= 0):
        table.error = "a run matches the reference exactly; the order is undefined"
        logger.warning(f"Convergence study of {base.name}: {table.error}")
        return table

    table.slope = float(np.polyfit(np.log(dts), np.log(err), 1)[0])
    try:
        table.order = _fit_order(np.asarray(dts), err, dt_ref)
    except RuntimeError as e:
        table.error = f"order fit failed: {e}"
        logger.warning(f"Convergence study of {base.name}: {table.error}")
    logger.info(f"Convergence order of {base.name}: {table.order:.4f} (slope {table.slope:.4f})")
    return table


def write_convergence_report(table: ConvergenceTable, out_dir: Union[str, Path]) -> Path:
    return write_report(Path(out_dir) / table.scenario / "convergence.txt", convergence_items(table))


def verify_design(path: Union[str, Path], tol: float = 1e-9) -> DesignVerification:
    """
    Re-run every residual and LMI check of a design file

    Failures are collected, not raised; parse errors are raised.

    Returns:
        DesignVerification with key/value items and the failed check names
    """
    plant, exo, design, _ = load_design_file(path)
    name = plant.name
    items: ReportItems = [("design", name)]
    failures: List[str] = []

    residual = regulator_residual(
        plant.A, plant.B, plant.F, exo.A, plant.C, exo.C, plant.H, exo.H, design.Pi, design.M_ff
    )
    items.append(("regulator.residual", residual))
    if residual > REGULATOR_TOL:
        failures.append(f"regulator equations: relative residual {residual:.3e} > {REGULATOR_TOL:g}")

    P = design.P
    symmetric = bool(np.linalg.norm(P - P.T) <= 1e-12 * max(1.0, float(np.linalg.norm(P))))
    min_eig = float(np.min(np.linalg.eigvalsh((P + P.T) / 2)))
    items.extend([("P.symmetric", symmetric), ("P.min_eigenvalue", min_eig)])
    if not symmetric:
        failures.append("P is not symmetric")
    if min_eig <= 0:
        failures.append(f"P is not positive definite (smallest eigenvalue {min_eig:.6g})")

    A_cl = plant.A + plant.B @ design.K
    if symmetric:
        gamma_star = bisect_gamma(A_cl, plant.G, plant.H, plant.J, P, tol)
        gamma = design.gamma if design.gamma > 0 else gamma_star
        items.append(("passivity.gamma_star", gamma_star))
        if gamma > 0:
            feasible, margin = check_strict_passivity(A_cl, plant.G, plant.H, plant.J, P, gamma, tol)
            items.extend([("passivity.gamma", gamma), ("passivity.margin", margin), ("passivity.feasible", feasible)])
            if not feasible:
                failures.append(f"passivity LMI is not negative semidefinite: largest eigenvalue {margin:.6g}")
        else:
            items.append(("passivity.feasible", False))
            failures.append("no positive dissipation rate certifies (A + BK, G, H, J) with this P")

        A_s, G_s, H_s, J_s = stacked_quadruple(A_cl, plant.G, plant.H, plant.J, design.Pi, exo.G, exo.J)
        stacked_gamma = bisect_gamma(A_s, G_s, H_s, J_s, P, tol)
        items.append(("stacked.gamma_star", stacked_gamma))

    if plant.B_ext is not None or exo.B_ext is not None or design.N is not None:
        d_e = (plant.B_ext if plant.B_ext is not None else exo.B_ext).shape[1]
        B_ext = plant.B_ext if plant.B_ext is not None else np.zeros((plant.n, d_e))
        B_r = exo.B_ext if exo.B_ext is not None else np.zeros((exo.n, d_e))
        N = design.N if design.N is not None else feedforward_match(plant.B, B_ext, design.Pi, B_r).N
        ff_residual = float(np.linalg.norm(plant.B @ N + B_ext - design.Pi @ B_r))
        items.append(("feedforward.residual", ff_residual))
        if ff_residual > tol * max(1.0, float(np.linalg.norm(B_ext))):
            failures.append(f"feedforward B N + B_ext = Pi B_r fails with residual {ff_residual:.3e}")

    if design.L is not None:
        A_hat, C_hat, G_hat, H_hat, J_hat = observer_data(plant, exo)
        A_obs = A_hat - design.L @ C_hat
        if design.P_hat is None:
            failures.append("injection gain L without certificate P_hat")
        else:
            gamma_hat = design.gamma_hat or bisect_gamma(A_obs, G_hat, H_hat, J_hat, design.P_hat, tol)
            try:
                feasible, margin = check_strict_passivity(A_obs, G_hat, H_hat, J_hat, design.P_hat, gamma_hat, tol)
            except ValueError as e:
                feasible, margin = False, float("nan")
                failures.append(f"observer certificate: {e}")
            items.extend([("observer.gamma", gamma_hat), ("observer.margin", margin), ("observer.feasible", feasible)])
            if not feasible and not np.isnan(margin):
                failures.append(f"observer passivity LMI is not negative semidefinite: largest eigenvalue {margin:.6g}")

    passed = not failures
    items.append(("passed", passed))
    if passed:
        logger.info(f"Design {name} verified")
    else:
        for failure in failures:
            logger.warning(f"Design {name}: {failure}")
    return DesignVerification(name=name, passed=passed, items=items, failures=failures)
