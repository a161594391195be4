"""
Scenario and design files (JSON, matrices as row-major nested lists)

A scenario file names the plant, the exosystem, a shared constraint and either
an inline design, a design file, or {"synthesize": true}. A design file is
self-contained: it repeats the plant and exosystem matrices next to the design
and the residual/margin certificates so it can be re-verified on its own.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from geometry import MovingSet, PolyhedralCone, signal_from_dict
from integrator import EviSystem
from regulation import (
    RegulatorDesign,
    bisect_gamma,
    check_strict_passivity,
    feedforward_match,
    find_observer_gain,
    find_passifying_gain,
    observer_data,
    regulator_residual,
    solve_regulator_equations,
    viability_input_matrix,
)
from utils.errors import EviError, ScenarioValidationError
from utils.textio import matrix_to_lists
from .library import BUILTIN_SCENARIOS, get_builtin
from .model import OUTPUT_KINDS, Scenario

logger = logging.getLogger(__name__)

REGULATOR_TOL = 1e-10

PLANT_KEYS = ("A", "B", "F", "G", "H", "J", "B_ext", "C")
EXO_KEYS = ("A", "G", "H", "J", "B_ext", "C")


def _read_json(path: Path) -> Dict[str, Any]:
    try:
        text = path.read_text()
    except OSError as e:
        raise ScenarioValidationError(str(path), f"cannot read file: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioValidationError(f"{path}:{e.lineno}:{e.colno}", e.msg) from e
    if not isinstance(data, dict):
        raise ScenarioValidationError(str(path), "top level must be an object")
    return data


def _matrix(value: Any, field: str) -> np.ndarray:
    try:
        arr = np.atleast_2d(np.asarray(value, dtype=float))
    except (TypeError, ValueError) as e:
        raise ScenarioValidationError(field, f"expected a matrix of numbers ({e})") from e
    if arr.ndim != 2:
        raise ScenarioValidationError(field, f"expected a matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ScenarioValidationError(field, "entries must be finite")
    return arr


def _vector(value: Any, field: str) -> np.ndarray:
    try:
        arr = np.atleast_1d(np.asarray(value, dtype=float))
    except (TypeError, ValueError) as e:
        raise ScenarioValidationError(field, f"expected a vector of numbers ({e})") from e
    if arr.ndim != 1:
        raise ScenarioValidationError(field, f"expected a vector, got shape {arr.shape}")
    return arr


def _optional_matrix(block: Dict[str, Any], key: str, prefix: str) -> Optional[np.ndarray]:
    value = block.get(key)
    return None if value is None else _matrix(value, f"{prefix}.{key}")


def _require(block: Dict[str, Any], key: str, prefix: str) -> Any:
    if key not in block:
        raise ScenarioValidationError(f"{prefix}.{key}", "missing")
    return block[key]


def _moving_set(spec: Dict[str, Any], field: str) -> MovingSet:
    cone_spec = spec.get("cone", "orthant")
    try:
        offset = signal_from_dict(_require(spec, "offset", field))
        if cone_spec == "orthant":
            cone = PolyhedralCone.orthant(offset.dim)
        elif isinstance(cone_spec, dict) and "face_matrix" in cone_spec:
            cone = PolyhedralCone(face_matrix=_matrix(cone_spec["face_matrix"], f"{field}.cone.face_matrix"))
        elif isinstance(cone_spec, dict) and "generator_matrix" in cone_spec:
            cone = PolyhedralCone(generator_matrix=_matrix(cone_spec["generator_matrix"], f"{field}.cone.generator_matrix"))
        else:
            raise ScenarioValidationError(f"{field}.cone", "expected 'orthant', face_matrix or generator_matrix")
        default = "absolutely_continuous" if offset.is_continuous else "right_continuous_bv"
        return MovingSet(
            cone=cone,
            offset=offset,
            regularity=spec.get("regularity", default),
            variation_bound=spec.get("variation_bound"),
        )
    except ScenarioValidationError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ScenarioValidationError(field, str(e)) from e


def _system(block: Dict[str, Any], prefix: str, moving_set: MovingSet, f_ext, name: str, plant: bool) -> EviSystem:
    keys = PLANT_KEYS if plant else EXO_KEYS
    unknown = set(block) - set(keys) - {"constraint"}
    if unknown:
        raise ScenarioValidationError(prefix, f"unknown keys {sorted(unknown)}")

    B = _optional_matrix(block, "B", prefix)
    H = _matrix(_require(block, "H", prefix), f"{prefix}.H")
    G_spec = _require(block, "G", prefix)
    if G_spec == "viability":
        if B is None:
            raise ScenarioValidationError(f"{prefix}.G", "'viability' needs the input matrix B")
        G = viability_input_matrix(B, H)
    else:
        G = _matrix(G_spec, f"{prefix}.G")

    B_ext = _optional_matrix(block, "B_ext", prefix)
    try:
        return EviSystem(
            A=_matrix(_require(block, "A", prefix), f"{prefix}.A"),
            G=G,
            H=H,
            J=_matrix(_require(block, "J", prefix), f"{prefix}.J"),
            moving_set=moving_set,
            B=B,
            F=_optional_matrix(block, "F", prefix),
            B_ext=B_ext,
            f_ext=f_ext if B_ext is not None else None,
            C=_matrix(_require(block, "C", prefix), f"{prefix}.C"),
            name=name,
        )
    except ValueError as e:
        raise ScenarioValidationError(prefix, str(e)) from e


def design_from_dict(block: Dict[str, Any], prefix: str = "design") -> RegulatorDesign:
    """Parse a design block; gamma may be omitted and is then bisected by the caller"""
    try:
        return RegulatorDesign(
            Pi=_matrix(_require(block, "Pi", prefix), f"{prefix}.Pi"),
            M_ff=_matrix(_require(block, "M", prefix), f"{prefix}.M"),
            K=_matrix(_require(block, "K", prefix), f"{prefix}.K"),
            P=_matrix(_require(block, "P", prefix), f"{prefix}.P"),
            gamma=float(block.get("gamma", 0.0)),
            L=_optional_matrix(block, "L", prefix),
            P_hat=_optional_matrix(block, "P_hat", prefix),
            gamma_hat=block.get("gamma_hat"),
            N=_optional_matrix(block, "N", prefix),
            residual=float(block.get("residual", 0.0)),
            margin=float(block.get("margin", 0.0)),
        )
    except ValueError as e:
        raise ScenarioValidationError(prefix, str(e)) from e


def design_to_dict(design: RegulatorDesign) -> Dict[str, Any]:
    data = {
        "Pi": matrix_to_lists(design.Pi),
        "M": matrix_to_lists(design.M_ff),
        "K": matrix_to_lists(design.K),
        "P": matrix_to_lists(design.P),
        "gamma": design.gamma,
        "residual": design.residual,
        "margin": design.margin,
    }
    if design.N is not None:
        data["N"] = matrix_to_lists(design.N)
    if design.L is not None:
        data["L"] = matrix_to_lists(design.L)
        data["P_hat"] = matrix_to_lists(design.P_hat)
        data["gamma_hat"] = design.gamma_hat
    return data


def _system_to_dict(system: EviSystem, keys: Tuple[str, ...]) -> Dict[str, Any]:
    return {k: matrix_to_lists(getattr(system, k)) for k in keys if getattr(system, k) is not None}


def design_file_dict(scenario: Scenario) -> Dict[str, Any]:
    """Self-contained design file content for a scenario"""
    return {
        "name": scenario.name,
        "plant": _system_to_dict(scenario.plant, PLANT_KEYS),
        "exosystem": _system_to_dict(scenario.exo, EXO_KEYS),
        "design": design_to_dict(scenario.design),
    }


def write_design_file(scenario: Scenario, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(design_file_dict(scenario), indent=2) + "\n")
    logger.info(f"Wrote design file {path}")
    return path


def synthesize_design(plant: EviSystem, exo: EviSystem, compensator: bool = False, **kwargs) -> RegulatorDesign:
    """
    Regulator equations, passifying gain, feedforward and (optionally) observer gain

    Raises:
        ScenarioValidationError: any stage has no solution
    """
    solution = solve_regulator_equations(plant.A, plant.B, plant.F, exo.A, plant.C, exo.C, plant.H, exo.H)
    if not solution.solvable:
        raise ScenarioValidationError("design", f"regulator equations unsolvable (residual {solution.residual:.3e})")

    gain = find_passifying_gain(plant.A, plant.B, plant.G, plant.H, plant.J, **kwargs)
    if not gain.success:
        raise ScenarioValidationError("design.K", gain.error)

    N = None
    if plant.f_ext is not None or exo.B_ext is not None:
        forcing = plant.f_ext if plant.f_ext is not None else exo.f_ext
        d_e = forcing.dim if forcing is not None else exo.B_ext.shape[1]
        B_ext = plant.B_ext if plant.B_ext is not None else np.zeros((plant.n, d_e))
        B_r = exo.B_ext if exo.B_ext is not None else np.zeros((exo.n, d_e))
        match = feedforward_match(plant.B, B_ext, solution.Pi, B_r)
        if not match.feasible:
            raise ScenarioValidationError("design.N", f"no feedforward matches the forcing (residual {match.residual:.3e})")
        N = match.N

    extra = {}
    if compensator:
        observer = find_observer_gain(*observer_data(plant, exo), **kwargs)
        if not observer.success:
            raise ScenarioValidationError("design.L", observer.error)
        extra = {"L": observer.K, "P_hat": observer.P, "gamma_hat": observer.gamma}

    logger.info(f"Synthesized design for {plant.name}: gamma={gain.gamma:.4g}")
    return RegulatorDesign(
        Pi=solution.Pi, M_ff=solution.M_ff, K=gain.K, P=gain.P, gamma=gain.gamma,
        N=N, residual=solution.residual, margin=gain.margin, **extra,
    )


def check_regulator_fields(plant: EviSystem, exo: EviSystem, design: RegulatorDesign, tol: float = REGULATOR_TOL):
    """
    Refuse a design whose regulator equations fail, naming the equation

    Raises:
        ScenarioValidationError: field is design.M, exosystem.C or exosystem.H
    """
    scale = max(1.0, *(float(np.linalg.norm(m)) for m in (plant.A, plant.B, exo.A, plant.C, plant.H)))
    F = plant.F if plant.F is not None else np.zeros_like(design.Pi)
    try:
        checks = (
            ("design.M", design.Pi @ exo.A - plant.A @ design.Pi - plant.B @ design.M_ff - F, "Pi A_r = A Pi + B M + F"),
            ("exosystem.C", exo.C - plant.C @ design.Pi, "C_r = C Pi"),
            ("exosystem.H", exo.H - plant.H @ design.Pi, "H_r = H Pi"),
        )
    except ValueError as e:
        raise ScenarioValidationError("design", f"shapes do not match the plant and exosystem: {e}") from e
    for field, residual, equation in checks:
        value = float(np.linalg.norm(residual)) / scale
        if value > tol:
            raise ScenarioValidationError(field, f"regulator equation {equation} fails with relative residual {value:.3e}")


def _certify_loaded_design(plant: EviSystem, exo: EviSystem, design: RegulatorDesign, tol: float) -> RegulatorDesign:
    check_regulator_fields(plant, exo, design)
    design.residual = regulator_residual(
        plant.A, plant.B, plant.F, exo.A, plant.C, exo.C, plant.H, exo.H, design.Pi, design.M_ff
    )
    A_cl = plant.A + plant.B @ design.K
    if design.gamma <= 0:
        design.gamma = bisect_gamma(A_cl, plant.G, plant.H, plant.J, design.P, tol)
    if design.gamma <= 0:
        raise ScenarioValidationError("design.P", "no positive dissipation rate certifies (A + BK, G, H, J)")
    try:
        feasible, margin = check_strict_passivity(A_cl, plant.G, plant.H, plant.J, design.P, design.gamma, tol)
    except ValueError as e:
        raise ScenarioValidationError("design.P", str(e)) from e
    if not feasible:
        raise ScenarioValidationError("design.P", f"passivity LMI fails with margin {margin:.3e}")
    design.margin = margin

    if design.L is not None:
        A_hat, C_hat, G_hat, H_hat, J_hat = observer_data(plant, exo)
        A_obs = A_hat - design.L @ C_hat
        if design.P_hat is None:
            raise ScenarioValidationError("design.P_hat", "an injection gain L needs its certificate P_hat")
        if not design.gamma_hat:
            design.gamma_hat = bisect_gamma(A_obs, G_hat, H_hat, J_hat, design.P_hat, tol)
        try:
            feasible, margin = check_strict_passivity(A_obs, G_hat, H_hat, J_hat, design.P_hat, design.gamma_hat, tol)
        except ValueError as e:
            raise ScenarioValidationError("design.P_hat", str(e)) from e
        if not feasible:
            raise ScenarioValidationError("design.P_hat", f"observer passivity LMI fails with margin {margin:.3e}")
    return design


def scenario_from_dict(data: Dict[str, Any], base_dir: Optional[Path] = None, tol: float = 1e-9) -> Scenario:
    """
    Build and validate a scenario from its JSON description

    Raises:
        ScenarioValidationError: with the offending field path
    """
    base_dir = base_dir or Path.cwd()
    name = str(_require(data, "name", "scenario"))

    f_ext = None
    if data.get("f_ext") is not None:
        try:
            f_ext = signal_from_dict(data["f_ext"])
        except (KeyError, TypeError, ValueError) as e:
            raise ScenarioValidationError("f_ext", str(e)) from e

    plant_block = _require(data, "plant", "scenario")
    exo_block = _require(data, "exosystem", "scenario")
    shared = data.get("constraint")
    plant_set = _moving_set(plant_block.get("constraint") or shared or {}, "plant.constraint")
    exo_set = _moving_set(exo_block.get("constraint") or shared or {}, "exosystem.constraint")

    plant = _system(plant_block, "plant", plant_set, f_ext, name, plant=True)
    exo = _system(exo_block, "exosystem", exo_set, f_ext, f"{name}-reference", plant=False)
    if plant.B is None:
        raise ScenarioValidationError("plant.B", "missing")

    controller = data.get("controller", "static")
    if "design_file" in data:
        design_data = _read_json((base_dir / data["design_file"]).resolve())
        design = design_from_dict(_require(design_data, "design", "design_file"))
    else:
        block = _require(data, "design", "scenario")
        if block.get("synthesize"):
            design = synthesize_design(plant, exo, compensator=controller == "compensator")
        else:
            design = design_from_dict(block)
    design = _certify_loaded_design(plant, exo, design, tol)

    outputs = tuple(data.get("outputs", OUTPUT_KINDS))
    try:
        return Scenario(
            name=name,
            plant=plant,
            exo=exo,
            design=design,
            x0=_vector(_require(data, "x0", "scenario"), "x0"),
            x_r0=_vector(_require(data, "x_r0", "scenario"), "x_r0"),
            horizon=float(_require(data, "horizon", "scenario")),
            dt=float(_require(data, "dt", "scenario")),
            controller=controller,
            x_hat0=None if data.get("x_hat0") is None else _vector(data["x_hat0"], "x_hat0"),
            x_hat_r0=None if data.get("x_hat_r0") is None else _vector(data["x_hat_r0"], "x_hat_r0"),
            viability=bool(data.get("viability", False)),
            description=str(data.get("description", "")),
            outputs=outputs,
        )
    except ValueError as e:
        raise ScenarioValidationError("scenario", str(e)) from e


def load_scenario(name_or_path: Union[str, Path], tol: float = 1e-9) -> Scenario:
    """
    Builtin name or path to a scenario JSON file

    Raises:
        ScenarioValidationError: the file does not parse or validate
        KeyError: neither a builtin nor an existing file
    """
    if isinstance(name_or_path, str) and name_or_path in BUILTIN_SCENARIOS:
        return get_builtin(name_or_path)
    path = Path(name_or_path)
    if not path.exists():
        return get_builtin(str(name_or_path))
    logger.info(f"Loading scenario file {path}")
    data = _read_json(path)
    try:
        return scenario_from_dict(data, base_dir=path.parent, tol=tol)
    except ScenarioValidationError as e:
        raise ScenarioValidationError(f"{path}: {e.field}", e.detail) from e
    except EviError as e:
        raise ScenarioValidationError(str(path), str(e)) from e


def load_design_file(path: Union[str, Path]) -> Tuple[EviSystem, EviSystem, RegulatorDesign, Dict[str, Any]]:
    """
    Parse a self-contained design file without certifying it

    Returns:
        (plant, exosystem, design, raw data); the systems carry a placeholder
        orthant constraint sized by H since only matrices matter here
    """
    path = Path(path)
    data = _read_json(path)
    plant_block = _require(data, "plant", "design_file")
    exo_block = _require(data, "exosystem", "design_file")

    def placeholder(block, prefix):
        d = _matrix(_require(block, "H", prefix), f"{prefix}.H").shape[0]
        return MovingSet(PolyhedralCone.orthant(d), signal_from_dict([0.0] * d))

    name = str(data.get("name", path.stem))
    plant = _system(plant_block, "plant", placeholder(plant_block, "plant"), None, name, plant=True)
    exo = _system(exo_block, "exosystem", placeholder(exo_block, "exosystem"), None, f"{name}-reference", plant=False)
    design = design_from_dict(_require(data, "design", "design_file"))
    return plant, exo, design, data
