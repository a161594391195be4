"""
Lemke, the brute-force oracle, the cone CP reduction and least-norm multipliers
"""
import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from geometry import ConeCpInstance, ConstantSignal, MovingSet, PolyhedralCone
from lcp import (
    LcpProblem,
    brute_force_lcp,
    enumerate_lcp_solutions,
    iter_supports,
    least_norm_eta,
    lemke_solve,
    parse_lcp,
    range_projector,
    read_lcp,
    reduce_to_lcp,
    solve_cone_cp,
    solve_cone_lcp,
    write_lcp,
)
from utils.errors import AssumptionViolation, ComplementarityError, DimensionError

from conftest import orthant_set


def monotone_matrix(rng, d: int) -> np.ndarray:
    """PSD part of random rank plus a skew part; copositive-plus by construction"""
    k = int(rng.integers(1, d + 1))
    A = rng.normal(size=(d, k))
    S = rng.normal(size=(d, d))
    return A @ A.T + (S - S.T) * rng.uniform(0, 1)


def spd_matrix(rng, d: int) -> np.ndarray:
    A = rng.normal(size=(d, d))
    return A @ A.T + 0.1 * np.eye(d)


class TestLemke:
    def test_nonnegative_q_is_trivial(self, rng):
        problem = LcpProblem(rng.normal(size=(3, 3)), np.array([1.0, 0.0, 2.0]))
        solution = lemke_solve(problem)
        assert solution.solved
        assert_allclose(solution.z, 0.0)
        assert_allclose(solution.w, problem.q)

    def test_scalar(self):
        solution = lemke_solve(LcpProblem([[1.0]], [-2.0]))
        assert solution.solved
        assert_allclose(solution.z, [2.0])
        assert_allclose(solution.w, [0.0], atol=1e-12)

    def test_ray_termination_is_not_solved(self):
        solution = lemke_solve(LcpProblem([[0.0]], [-1.0]))
        assert solution.status == "ray_termination"
        assert not solution.solved
        assert solution.error

    def test_rejects_non_finite_data(self):
        with pytest.raises(ValueError):
            lemke_solve(LcpProblem([[np.nan]], [-1.0]))

    def test_matches_oracle_on_positive_definite(self, rng):
        for _ in range(100):
            d = int(rng.integers(1, 9))
            problem = LcpProblem(spd_matrix(rng, d), rng.normal(size=d))
            lemke = lemke_solve(problem)
            oracle = brute_force_lcp(problem)
            assert lemke.solved and oracle.solved
            assert lemke.support(1e-9) == oracle.support(1e-9)
            assert_allclose(lemke.z, oracle.z, atol=1e-10)

    def test_oracle_equivalence(self, rng):
        solved = 0
        for i in range(500):
            d = int(rng.integers(1, 9))
            M = spd_matrix(rng, d) if i % 2 else monotone_matrix(rng, d)
            problem = LcpProblem(M, rng.normal(size=d))
            lemke = lemke_solve(problem)
            oracle = brute_force_lcp(problem)
            assert lemke.solved == oracle.solved, f"instance {i}: {lemke.status} vs {oracle.status}"
            if lemke.solved:
                solved += 1
                scale = max(1.0, float(np.max(np.abs(problem.q))))
                assert lemke.complementarity_residual <= 1e-10 * scale
                assert oracle.complementarity_residual <= 1e-10 * scale
        assert solved > 250


class TestBruteForce:
    def test_support_order(self):
        assert list(iter_supports(2)) == [(), (0,), (1,), (0, 1)]

    def test_scalar(self):
        assert_allclose(brute_force_lcp(LcpProblem([[1.0]], [-2.0])).z, [2.0])

    def test_nonsymmetric_feedthrough(self):
        problem = LcpProblem([[0.0, -1.0], [1.0, 1.0]], [1.0, -1.0])
        solution = brute_force_lcp(problem)
        assert solution.solved
        assert solution.complementarity_residual <= 1e-12
        assert_allclose(solution.z, [0.0, 1.0])

    def test_infeasible(self):
        solution = brute_force_lcp(LcpProblem([[0.0]], [-1.0]))
        assert solution.status == "infeasible"

    def test_dimension_cap(self):
        with pytest.raises(DimensionError):
            brute_force_lcp(LcpProblem(np.eye(17), -np.ones(17)))

    def test_singular_support_through_lp(self):
        # M_SS singular but consistent: z1 + z2 = 1
        problem = LcpProblem([[1.0, 1.0], [1.0, 1.0]], [-1.0, -1.0])
        solution = brute_force_lcp(problem)
        assert solution.solved
        assert solution.certify(problem)


class TestTextFormat:
    def test_file_keeps_full_precision(self, tmp_path):
        problem = LcpProblem([[2.0, -1.0], [0.5, 1.0 / 3.0]], [-1.0, 0.1])
        parsed = read_lcp(write_lcp(problem, tmp_path / "instance.lcp"))
        assert np.array_equal(parsed.M, problem.M)
        assert np.array_equal(parsed.q, problem.q)

    def test_comments_and_blank_lines(self):
        problem = parse_lcp("# scalar\n1\n\n2.0  # M\n-4\n")
        assert problem.dim == 1
        assert lemke_solve(problem).z[0] == pytest.approx(2.0)

    def test_wrong_count(self):
        with pytest.raises(DimensionError):
            parse_lcp("2\n1 0\n0 1\n1\n")

    def test_empty(self):
        with pytest.raises(ValueError):
            parse_lcp("# nothing\n")


class TestConeCp:
    def test_inactive_fast_path(self):
        result = solve_cone_lcp(PolyhedralCone.orthant(2), np.eye(2), np.array([1.0, 2.0]))
        assert result.solved
        assert result.method == "inactive"
        assert_allclose(result.eta, 0.0)

    def test_full_space_has_zero_multiplier(self):
        result = solve_cone_lcp(PolyhedralCone.full_space(2), np.eye(2), np.array([-1.0, 2.0]))
        assert result.solved
        assert_allclose(result.eta, 0.0)

    def test_wedge_reduction(self):
        cone = PolyhedralCone(face_matrix=np.array([[1.0, 0.0], [1.0, 1.0]]))
        M = np.eye(2)
        q = np.array([-1.0, -1.0])
        problem = reduce_to_lcp(cone, M, q)
        assert_allclose(problem.M, cone.face_matrix @ cone.face_matrix.T)
        result = solve_cone_lcp(cone, M, q)
        assert result.solved
        assert cone.contains(result.y, 1e-9)
        assert cone.dual_contains(result.eta, 1e-9)
        assert abs(float(result.eta @ result.y)) <= 1e-9

    def test_oracle_on_random_psd_feedthrough(self, rng):
        cone = PolyhedralCone(face_matrix=np.array([[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 1.0]]))
        for _ in range(100):
            A = rng.normal(size=(3, 2))
            J = A @ A.T
            H = rng.normal(size=(3, 3))
            inst = ConeCpInstance(H, J, MovingSet(cone, ConstantSignal(np.zeros(3))))
            x = rng.normal(size=3)
            q = H @ x
            lemke = solve_cone_lcp(cone, J, q, method="lemke")
            oracle = solve_cone_lcp(cone, J, q, method="brute_force")
            assert lemke.solved == oracle.solved
            if lemke.solved:
                assert_allclose((J + J.T) @ (lemke.eta - oracle.eta), 0.0, atol=1e-8)
                eta = solve_cone_cp(inst, x, 0.0)
                assert_allclose((J + J.T) @ (eta - lemke.eta), 0.0, atol=1e-8)

    def test_unsolvable_raises_with_status(self):
        inst = ConeCpInstance(np.eye(1), np.zeros((1, 1)), orthant_set(1))
        with pytest.raises(ComplementarityError) as excinfo:
            solve_cone_cp(inst, np.array([-1.0]), 0.0)
        assert excinfo.value.status in ("ray_termination", "infeasible")


class TestLeastNorm:
    @pytest.mark.parametrize("x", [[0.5, -2.0], [0.0, -2.0], [3.0, 1.0]])
    def test_symmetric_feedthrough(self, x):
        J = np.array([[0.0, 0.0], [0.0, 1.0]])
        inst = ConeCpInstance(np.eye(2), J, orthant_set(2))
        x = np.array(x)
        lam = least_norm_eta(inst, x, 0.0)
        eta = solve_cone_cp(inst, x, 0.0, method="brute_force")
        assert_allclose(lam, range_projector(J) @ eta, atol=1e-10)
        assert lam[0] == pytest.approx(0.0, abs=1e-12)
        assert lam[1] == pytest.approx(max(0.0, -x[1]))

    def test_kernel_property(self, rng):
        for _ in range(50):
            A = rng.normal(size=(3, 1))
            J = A @ A.T
            q = rng.normal(size=3)
            solutions = enumerate_lcp_solutions(LcpProblem(J, q))
            for a, b in itertools.combinations(solutions, 2):
                assert_allclose((J + J.T) @ (a - b), 0.0, atol=1e-8)

    def test_nonsymmetric_feedthrough(self):
        J = np.array([[0.0, -1.0], [1.0, 1.0]])
        inst = ConeCpInstance(np.eye(2), J, orthant_set(2))
        lam = least_norm_eta(inst, np.array([1.0, -1.0]), 0.0)
        q = np.array([1.0, -1.0])
        y = q + J @ lam
        assert np.all(y >= -1e-10) and np.all(lam >= -1e-10)
        assert abs(float(lam @ y)) <= 1e-10

    def test_nonsymmetric_feedthrough_without_range_solution(self):
        # the only multiplier at x = (0.5, -2) is (1.5, 0.5), outside range(J + J^T)
        J = np.array([[0.0, -1.0], [1.0, 1.0]])
        inst = ConeCpInstance(np.eye(2), J, orthant_set(2))
        assert_allclose(solve_cone_cp(inst, np.array([0.5, -2.0]), 0.0), [1.5, 0.5], atol=1e-10)
        with pytest.raises(AssumptionViolation) as excinfo:
            least_norm_eta(inst, np.array([0.5, -2.0]), 0.0)
        assert excinfo.value.assumption == "A4"

    def test_lipschitz_on_held_out_states(self, rng):
        # wedge in the first two coordinates, third coordinate free; J is singular
        cone = PolyhedralCone(face_matrix=np.array([[1.0, 0.0, 0.0], [1.0, 1.0, 0.0]]))
        S = np.array([[2.0, 0.5], [-0.5, 1.0]])
        J = np.zeros((3, 3))
        J[:2, :2] = S
        inst = ConeCpInstance(np.eye(3), J, MovingSet(cone, ConstantSignal(np.zeros(3))))

        def slopes(count: int) -> np.ndarray:
            out = []
            for _ in range(count):
                x_a = rng.normal(size=3)
                x_b = x_a + rng.normal(scale=rng.choice([1e-2, 1e-1, 1.0]), size=3)
                gap = np.linalg.norm(least_norm_eta(inst, x_a, 0.0) - least_norm_eta(inst, x_b, 0.0))
                out.append(gap / np.linalg.norm(x_a - x_b))
            return np.array(out)

        calibration = slopes(400)
        constant = float(np.max(calibration))
        assert constant > 0.0
        # <d_eta, S d_eta> >= mu |d_eta|^2 bounds the slope by 1 / mu
        mu = float(np.min(np.linalg.eigvalsh((S + S.T) / 2)))
        assert constant <= (1.0 + 1e-6) / mu
        held_out = slopes(200)
        assert np.all(held_out <= constant * 1.5)
