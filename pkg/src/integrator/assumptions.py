"""
Well-posedness checks A1-A5 for a polyhedral EVI

A1  J positive semidefinite and ker(J + J^T) ⊆ ker(P G - H^T)
A2  drift Lipschitz with modulus rho
A3  rge H - K = R^d (exact LP test) and admissible states reachable (sampled)
A4  least-norm multiplier solves the cone CP (sampled, never exhaustive)
A5  rge J ⊆ rge H, J K* ⊆ rge H (rank tests) and the variation bound of h (sampled)
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from lcp import kernel_basis, least_norm_eta, solve_cone_lcp
from utils.errors import AssumptionViolation, DimensionError, EviError
from .stepping import resolve_jump
from .system import EviSystem

logger = logging.getLogger(__name__)


@dataclass
class AssumptionCheck:
    """One assumption verdict with the number that decided it"""
    name: str
    passed: bool
    margin: float
    detail: str = ""
    witness: Optional[np.ndarray] = None
    exhaustive: bool = True


@dataclass
class AssumptionReport:
    a1_kernel_inclusion: AssumptionCheck
    a1_J_psd: AssumptionCheck
    a2_lipschitz: AssumptionCheck
    a3_constraint_qualification: AssumptionCheck
    a4_range_intersection: AssumptionCheck
    a5_range_inclusion_rgeJ_rgeH: AssumptionCheck
    certificate_P: np.ndarray
    error: Optional[str] = None

    def checks(self) -> List[AssumptionCheck]:
        return [
            self.a1_kernel_inclusion,
            self.a1_J_psd,
            self.a2_lipschitz,
            self.a3_constraint_qualification,
            self.a4_range_intersection,
            self.a5_range_inclusion_rgeJ_rgeH,
        ]

    @property
    def all_passed(self) -> bool:
        return all(check.passed for check in self.checks())

    def failures(self) -> List[str]:
        return [check.name for check in self.checks() if not check.passed]


def _check_certificate(P: np.ndarray, n: int, tol: float) -> np.ndarray:
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.shape != (n, n):
        raise DimensionError(f"Certificate P must be {n}x{n}, got {P.shape}")
    if np.linalg.norm(P - P.T) > tol * max(1.0, np.linalg.norm(P)):
        raise AssumptionViolation("certificate P is not symmetric", assumption="A1")
    min_eig = float(np.linalg.eigvalsh(P).min())
    if min_eig <= 0:
        raise AssumptionViolation(
            f"certificate P is not positive definite (min eigenvalue {min_eig:.3e})",
            assumption="A1",
        )
    return P


def _kernel_inclusion(system: EviSystem, P: np.ndarray, tol: float) -> AssumptionCheck:
    basis = kernel_basis(system.J)
    defect = P @ system.G - system.H.T
    if basis.shape[1] == 0:
        return AssumptionCheck("A1 kernel inclusion", True, 0.0, "ker(J + J^T) = {0}")

    images = defect @ basis
    norms = np.linalg.norm(images, axis=0)
    worst = int(np.argmax(norms))
    margin = float(norms[worst])
    scale = max(1.0, float(np.linalg.norm(P @ system.G)), float(np.linalg.norm(system.H)))
    passed = margin <= tol * scale * 10
    return AssumptionCheck(
        "A1 kernel inclusion",
        passed,
        margin,
        f"|(PG - H^T) z| over an orthonormal basis of ker(J + J^T), dim {basis.shape[1]}",
        witness=None if passed else basis[:, worst],
    )


def _j_psd(system: EviSystem, tol: float) -> AssumptionCheck:
    sym = (system.J + system.J.T) / 2
    min_eig = float(np.linalg.eigvalsh(sym).min()) if sym.size else 0.0
    scale = max(1.0, float(np.linalg.norm(system.J)))
    return AssumptionCheck("A1 J psd", min_eig >= -tol * scale, min_eig, "min eigenvalue of (J + J^T)/2")


def _lipschitz(system: EviSystem) -> AssumptionCheck:
    rho = system.rho
    if not np.isfinite(rho) or rho < 0:
        return AssumptionCheck("A2 Lipschitz", False, rho, "modulus must be finite and nonnegative")
    if system.drift is None:
        norm_a = float(np.linalg.norm(system.A, 2))
        return AssumptionCheck(
            "A2 Lipschitz", rho >= norm_a * (1 - 1e-12), rho - norm_a, f"rho={rho:.6g}, |A|_2={norm_a:.6g}"
        )
    return AssumptionCheck("A2 Lipschitz", True, rho, f"user-supplied rho={rho:.6g}", exhaustive=False)


def _surjective_with_cone(H: np.ndarray, R: np.ndarray) -> float:
    """
    Worst LP infeasibility of H x - k = +/- e_i with R k >= 0

    Returns 0 when rge H - K = R^d.
    """
    d, n = H.shape
    m = R.shape[0]
    # variables (x, k); x free, k free with R k >= 0
    A_eq = np.hstack([H, -np.eye(d)])
    A_ub = np.hstack([np.zeros((m, n)), -R]) if m else None
    b_ub = np.zeros(m) if m else None
    worst = 0.0
    for i in range(d):
        for sign in (1.0, -1.0):
            target = np.zeros(d)
            target[i] = sign
            result = linprog(
                c=np.zeros(n + d),
                A_ub=A_ub,
                b_ub=b_ub,
                A_eq=A_eq,
                b_eq=target,
                bounds=[(None, None)] * (n + d),
                method="highs",
            )
            if result.status != 0:
                worst = max(worst, 1.0)
    return worst


def _in_range(H: np.ndarray, vectors: np.ndarray, tol: float) -> float:
    """Largest relative least-squares residual of the columns of vectors against rge H"""
    if vectors.size == 0:
        return 0.0
    coeffs, *_ = np.linalg.lstsq(H, vectors, rcond=None)
    residual = np.linalg.norm(H @ coeffs - vectors, axis=0)
    scale = np.maximum(1.0, np.linalg.norm(vectors, axis=0))
    return float(np.max(residual / scale))


def _rank(matrix: np.ndarray, tol: float) -> int:
    if matrix.size == 0:
        return 0
    s = np.linalg.svd(matrix, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0]) * max(matrix.shape)))


def check_assumptions(
    system: EviSystem,
    P: np.ndarray,
    n_samples: int = 100,
    box: float = 2.0,
    times: Optional[Sequence[float]] = None,
    seed: int = 42,
    tol: float = 1e-9
) -> AssumptionReport:
    """
    Check the well-posedness assumptions on a system with certificate P

    Args:
        system: The EVI
        P: Symmetric positive definite certificate for A1
        n_samples: Number of sampled states per time for A3/A4
        box: Samples are drawn uniformly from [-box, box]^n around the origin
        times: Times at which h is sampled (defaults to [0])
        seed: RNG seed
        tol: Algebraic tolerance

    Returns:
        AssumptionReport

    Raises:
        AssumptionViolation: P not symmetric positive definite
    """
    P = _check_certificate(P, system.n, tol)
    times = list(times) if times is not None else [0.0]
    rng = np.random.default_rng(seed)

    a1_kernel = _kernel_inclusion(system, P, tol)
    a1_psd = _j_psd(system, tol)
    a2 = _lipschitz(system)

    cone = system.moving_set.cone
    R = cone.face_form()

    lp_gap = _surjective_with_cone(system.H, R)
    reach_failures = 0
    least_norm_failures = 0
    worst_residual = 0.0
    samples = 0
    for t in times:
        for _ in range(n_samples):
            x = rng.uniform(-box, box, size=system.n)
            samples += 1
            try:
                outcome = resolve_jump(system, t, x, tol=tol)
            except EviError:
                reach_failures += 1
                continue
            try:
                lam = least_norm_eta(system.instance, outcome.x_plus, t, tol=tol)
            except EviError:
                least_norm_failures += 1
                continue
            q = system.H @ outcome.x_plus + system.moving_set.h(t)
            check = solve_cone_lcp(cone, system.J, q, tol=tol)
            if check.solved:
                worst_residual = max(worst_residual, float(np.linalg.norm(system.J @ (lam - check.eta))))

    a3 = AssumptionCheck(
        "A3 constraint qualification",
        lp_gap == 0.0 and reach_failures == 0,
        lp_gap + reach_failures,
        f"rge H - K = R^d: {'yes' if lp_gap == 0.0 else 'no'}; "
        f"{reach_failures}/{samples} sampled states without an admissible jump",
        exhaustive=False,
    )
    a4 = AssumptionCheck(
        "A4 range intersection",
        least_norm_failures == 0,
        float(least_norm_failures),
        f"{least_norm_failures}/{samples} sampled admissible states where the least-norm "
        f"multiplier fails; max |J(lambda_im - eta)| = {worst_residual:.3e}",
        exhaustive=False,
    )

    rank_h = _rank(system.H, tol)
    rank_hj = _rank(np.hstack([system.H, system.J]), tol)
    cone_gap = _in_range(system.H, system.J @ R.T, tol) if R.shape[0] else 0.0
    variation_ok = True
    slope = 0.0
    if system.moving_set.regularity == "absolutely_continuous" and len(times) > 1:
        grid = np.linspace(min(times), max(times), 200)
        variation_ok, slope = system.moving_set.check_variation(grid)
    a5 = AssumptionCheck(
        "A5 range inclusion",
        rank_hj == rank_h and cone_gap <= 1e-8 and variation_ok,
        float(rank_hj - rank_h) + cone_gap,
        f"rank H={rank_h}, rank [H J]={rank_hj}, J K* residual {cone_gap:.3e}, "
        f"sampled slope of h {slope:.6g}",
    )

    report = AssumptionReport(
        a1_kernel_inclusion=a1_kernel,
        a1_J_psd=a1_psd,
        a2_lipschitz=a2,
        a3_constraint_qualification=a3,
        a4_range_intersection=a4,
        a5_range_inclusion_rgeJ_rgeH=a5,
        certificate_P=P,
    )
    if report.all_passed:
        logger.info(f"All assumptions pass for {system.name}")
    else:
        logger.warning(f"Assumptions failing for {system.name}: {', '.join(report.failures())}")
    return report
