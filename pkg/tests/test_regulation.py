"""
Regulator equations, passivity synthesis, closed-loop assembly and Lyapunov checks
"""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from geometry import PolyhedralCone, project_onto_cone
from regulation import (
    ErrorTrajectory,
    RegulatorDesign,
    bisect_gamma,
    build_compensator,
    build_static_loop,
    check_strict_passivity,
    compensator_weights,
    feedforward_match,
    find_observer_gain,
    find_passifying_gain,
    lyapunov_decrease_check,
    lyapunov_weight,
    monotonicity_cross_terms,
    observer_data,
    passivity_lmi,
    solve_regulator_equations,
    stacked_quadruple,
    static_control,
    viability_control,
    viability_input_matrix,
)
from scenarios import get_builtin
from utils.errors import DimensionError

CLIPPED_SINE = dict(
    A=[[-0.1, 1.0], [0.0, 0.0]],
    B=[[0.0], [1.0]],
    F=None,
    A_r=[[-0.1, 1.0], [-2.0, 1.0]],
    C=[[0.0, 1.0]],
    C_r=[[0.0, 1.0]],
    H=[[0.0, -1.0], [0.0, 1.0]],
    H_r=[[0.0, -1.0], [0.0, 1.0]],
)


class TestRegulatorEquations:
    def test_clipped_sine(self):
        solution = solve_regulator_equations(**CLIPPED_SINE)
        assert solution.solvable
        assert_allclose(solution.Pi, np.eye(2), atol=1e-10)
        assert_allclose(solution.M_ff, [[-2.0, 1.0]], atol=1e-10)
        assert solution.residual <= 1e-10

    def test_circuit(self):
        scenario = get_builtin("diode_circuit")
        plant, exo = scenario.plant, scenario.exo
        solution = solve_regulator_equations(plant.A, plant.B, plant.F, exo.A, plant.C, exo.C, plant.H, exo.H)
        assert solution.solvable
        assert_allclose(solution.Pi, [[1.0], [0.0]], atol=1e-10)
        assert_allclose(solution.M_ff, [[100.0]], rtol=1e-10)

    def test_mismatched_constraint_output(self):
        data = dict(CLIPPED_SINE, H_r=[[1.0, -1.0], [0.0, 1.0]])
        solution = solve_regulator_equations(**data)
        assert not solution.solvable
        assert solution.residual > 1e-10

    def test_dimension_check(self):
        with pytest.raises(DimensionError):
            solve_regulator_equations(**dict(CLIPPED_SINE, C_r=[[1.0]]))

    def test_feedforward_for_the_circuit_source(self):
        scenario = get_builtin("diode_circuit")
        match = feedforward_match(scenario.plant.B, scenario.plant.B_ext, scenario.design.Pi, scenario.exo.B_ext)
        assert match.feasible
        assert_allclose(match.N, [[0.0]], atol=1e-12)

    def test_static_control(self):
        design = RegulatorDesign(Pi=np.eye(2), M_ff=[[-2.0, 1.0]], K=[[-2.0, -2.0]], P=np.eye(2), gamma=1.0)
        assert_allclose(design.reference_gain, [[0.0, 3.0]])
        u = static_control(design, np.array([1.0, 0.5]), np.array([0.0, 1.0]))
        assert_allclose(u, [-2.0 - 1.0 + 3.0])

    def test_design_shapes(self):
        with pytest.raises(DimensionError):
            RegulatorDesign(Pi=np.eye(2), M_ff=[[-2.0, 1.0]], K=[[1.0]], P=np.eye(2), gamma=1.0)


class TestPassivity:
    def test_circuit_design_is_certified(self):
        scenario = get_builtin("diode_circuit")
        plant, design = scenario.plant, scenario.design
        A_cl = plant.A + plant.B @ design.K
        assert design.gamma > 0
        feasible, _ = check_strict_passivity(A_cl, plant.G, plant.H, plant.J, design.P, design.gamma)
        assert feasible
        assert bisect_gamma(A_cl, plant.G, plant.H, plant.J, design.P) == pytest.approx(design.gamma)
        # bisection backs off from the boundary, just above it is infeasible
        above, _ = check_strict_passivity(A_cl, plant.G, plant.H, plant.J, design.P, design.gamma / 0.99 * 1.001)
        assert not above

    def test_lmi_is_symmetric(self):
        lmi = passivity_lmi([[-1.0]], [[1.0, 0.5]], [[1.0], [0.0]], np.eye(2), [[2.0]], 0.5)
        assert lmi.shape == (3, 3)
        assert_allclose(lmi, lmi.T)

    def test_rejects_bad_certificate(self):
        with pytest.raises(ValueError):
            check_strict_passivity([[-1.0, 0.0], [0.0, -1.0]], np.eye(2), np.eye(2), np.zeros((2, 2)),
                                   [[1.0, 0.5], [0.0, 1.0]], 1.0)
        with pytest.raises(ValueError):
            check_strict_passivity([[-1.0]], [[1.0]], [[1.0]], [[0.0]], [[1.0]], 0.0)

    def test_unstable_drift_has_no_rate(self):
        assert bisect_gamma([[1.0]], [[1.0]], [[1.0]], [[0.0]], [[1.0]]) == 0.0

    def test_gain_for_saturated_plant_is_immediate(self):
        B = np.array([[1.0]])
        H = np.array([[-1.0], [1.0]])
        result = find_passifying_gain([[-1.0]], B, viability_input_matrix(B, H), H, np.zeros((2, 2)))
        assert result.success
        assert result.iterations == 0
        assert result.gamma > 0

    def test_gain_stabilizes_unstable_plant(self):
        result = find_passifying_gain([[1.0]], [[1.0]], [[1.0]], [[1.0]], [[0.0]])
        assert result.success, result.error
        # PG = H^T pins P = 1, so A + BK must be negative
        assert_allclose(result.P, [[1.0]], atol=1e-6)
        assert result.K[0, 0] < -1.0
        feasible, _ = check_strict_passivity(1.0 + result.K, [[1.0]], [[1.0]], [[0.0]], result.P, result.gamma)
        assert feasible

    def test_gain_for_clipped_sine_plant(self):
        plant = get_builtin("clipped_sine").plant
        result = find_passifying_gain(plant.A, plant.B, plant.G, plant.H, plant.J)
        assert result.success, result.error
        feasible, _ = check_strict_passivity(
            plant.A + plant.B @ result.K, plant.G, plant.H, plant.J, result.P, result.gamma
        )
        assert feasible
        assert result.gamma > 0
        # J = 0 forces P G = H^T
        assert_allclose(result.P @ plant.G, plant.H.T, atol=1e-6)

    @pytest.mark.slow
    def test_gain_on_plants_with_a_known_certificate(self, rng):
        certified = 0
        trials = 20
        for _ in range(trials):
            n = int(rng.integers(2, 5))
            m = int(rng.integers(1, n + 1))
            U, _ = np.linalg.qr(rng.normal(size=(n, n)))
            P0 = U @ np.diag(rng.uniform(0.5, 2.0, size=n)) @ U.T
            K0 = rng.normal(size=(m, n))
            skew = rng.normal(size=(n, n))
            # (A + B K0)^T P0 + P0 (A + B K0) = -2 P0
            A_cl = -np.eye(n) + np.linalg.solve(P0, skew - skew.T)
            B = rng.normal(size=(n, m))
            A = A_cl - B @ K0
            G, H, J = B, B.T @ P0, np.zeros((m, m))
            assert check_strict_passivity(A_cl, G, H, J, P0, 1.0)[0]

            result = find_passifying_gain(A, B, G, H, J)
            if result.success:
                assert check_strict_passivity(A + B @ result.K, G, H, J, result.P, result.gamma)[0]
                certified += 1
        assert certified >= 0.9 * trials

    def test_observer_gain(self):
        scenario = get_builtin("saturated_observer")
        A_hat, C_hat, G_hat, H_hat, J_hat = observer_data(scenario.plant, scenario.exo)
        result = find_observer_gain(A_hat, C_hat, G_hat, H_hat, J_hat)
        assert result.success, result.error
        L, P_hat = result.K, result.P
        assert L.shape == (2, 1)
        feasible, _ = check_strict_passivity(A_hat - L @ C_hat, G_hat, H_hat, J_hat, P_hat, result.gamma)
        assert feasible

    def test_stacked_quadruple_shapes(self):
        A, G, H, J = stacked_quadruple(-np.eye(2), np.eye(2), np.eye(2), np.zeros((2, 2)),
                                       np.eye(2), np.eye(2), np.zeros((2, 2)))
        assert A.shape == (2, 2)
        assert G.shape == (2, 4)
        assert H.shape == (4, 2)
        assert J.shape == (4, 4)


class TestViability:
    def test_input_matrix(self):
        G = viability_input_matrix([[0.0], [1.0]], [[0.0, -1.0], [0.0, 1.0]])
        assert_allclose(G, [[0.0, 0.0], [-1.0, 1.0]])

    def test_cancels_outward_input_on_active_face(self):
        plant = get_builtin("clipped_sine").plant
        u_eta = viability_control(plant, np.array([0.0, 1.0]), np.array([5.0]), None, 0.0)
        assert_allclose(u_eta, [-5.0], atol=1e-10)

    def test_inward_input_is_left_alone(self):
        plant = get_builtin("clipped_sine").plant
        assert_allclose(viability_control(plant, np.array([0.0, 1.0]), np.array([-5.0]), None, 0.0), [0.0])

    def test_interior_state(self):
        plant = get_builtin("clipped_sine").plant
        assert_allclose(viability_control(plant, np.zeros(2), np.array([5.0]), None, 0.0), [0.0])


class TestClosedLoop:
    def test_static_error_dynamics(self):
        scenario = get_builtin("clipped_sine")
        loop = build_static_loop(scenario.plant, scenario.exo, scenario.design)
        E = loop.error_selector
        assert_allclose(E @ loop.system.A, loop.error_drift @ E, atol=1e-12)
        assert loop.pairs == [("plant", "exo")]
        X0 = loop.initial_state(scenario.x0, scenario.x_r0)
        assert_allclose(loop.block(X0, "exo"), scenario.x_r0)

    def test_compensator_error_dynamics(self):
        scenario = get_builtin("saturated_observer")
        design = scenario.design
        loop = build_compensator(scenario.plant, scenario.exo, design.K, design.L, design)
        E = loop.error_selector
        assert E.shape == (3, 4)
        assert_allclose(E @ loop.system.A, loop.error_drift @ E, atol=1e-12)
        assert loop.system.d == 8
        assert ("exo", "observer_exo") in loop.pairs
        X0 = loop.initial_state(scenario.x0, scenario.x_r0)
        assert_allclose(loop.block(X0, "observer"), [0.0])

    def test_compensator_needs_matching_gain(self):
        scenario = get_builtin("saturated_observer")
        with pytest.raises(DimensionError):
            build_compensator(scenario.plant, scenario.exo, scenario.design.K, np.zeros((3, 1)), scenario.design)

    def test_compensator_weights(self):
        scenario = get_builtin("saturated_observer")
        design = scenario.design
        weights = compensator_weights(scenario.plant.B, design)
        sigma_p = np.linalg.eigvalsh(design.P).min()
        sigma_hat = np.linalg.eigvalsh(design.P_hat).min()
        assert weights.alpha * design.gamma * sigma_p > 1.0
        assert weights.beta * design.gamma_hat * sigma_hat > weights.alpha ** 2 * weights.chi ** 2
        assert weights.chi > 0

    def test_estimate_error_input_sign(self, rng):
        scenario = get_builtin("saturated_observer")
        design = scenario.design
        B = scenario.plant.B
        loop = build_compensator(scenario.plant, scenario.exo, design.K, design.L, design)
        W = np.hstack([-design.K, -design.reference_gain])
        assert_allclose(loop.error_drift[:1, 1:], B @ W, atol=1e-12)
        assert compensator_weights(B, design).chi == pytest.approx(np.linalg.norm(design.P @ B @ W, 2))
        x, x_r, x_hat, x_hat_r = rng.normal(size=4)
        u_hat = static_control(design, [x_hat], [x_hat_r])
        u = static_control(design, [x], [x_r])
        assert_allclose(u_hat, u + W @ np.array([x - x_hat, x_r - x_hat_r]), atol=1e-12)


class TestLyapunov:
    def _errors(self, values, jumps=()):
        values = np.asarray(values, dtype=float).reshape(-1, 1)
        return ErrorTrajectory(
            times=np.arange(len(values), dtype=float),
            errors=values,
            jump_flags=np.zeros(len(values), dtype=bool),
            jumps=list(jumps),
        )

    def test_decreasing(self):
        verdict = lyapunov_decrease_check(self._errors([2.0, 1.5, 1.0, 1.0]), [np.eye(1)])
        assert verdict.monotone
        assert verdict.worst_increase == 0.0
        assert_allclose(verdict.values, [4.0, 2.25, 1.0, 1.0])

    def test_increase_is_reported(self):
        verdict = lyapunov_decrease_check(self._errors([1.0, 0.5, 0.8]), [np.eye(1)])
        assert not verdict.monotone
        assert verdict.worst_increase == pytest.approx(0.64 - 0.25)

    def test_jump_increase_is_reported(self):
        jump = (1.0, np.array([0.5]), np.array([0.9]))
        verdict = lyapunov_decrease_check(self._errors([1.0, 0.5, 0.4], [jump]), [np.eye(1)])
        assert not verdict.monotone
        assert verdict.jump_violations == 1

    def test_weight_blocks(self):
        assert_allclose(lyapunov_weight([np.eye(1), 2 * np.eye(1)], alpha=3.0, beta=0.5), np.diag([3.0, 1.0]))
        with pytest.raises(DimensionError):
            lyapunov_weight([np.eye(1)] * 3)

    def test_cross_terms_of_complementary_blocks(self, rng):
        cone = PolyhedralCone(face_matrix=np.array([[1.0, 0.0], [1.0, 1.0]]))
        rows_eta, rows_v = [], []
        for _ in range(200):
            p1, p2 = rng.normal(size=2), rng.normal(size=2)
            v1, v2 = project_onto_cone(cone, p1), project_onto_cone(cone, p2)
            rows_eta.append(np.concatenate([v1 - p1, v2 - p2]))
            rows_v.append(np.concatenate([v1, v2]))
        terms = monotonicity_cross_terms(np.array(rows_eta), np.array(rows_v), slice(0, 2), slice(2, 4))
        assert terms.shape == (200,)
        assert np.all(terms <= 1e-9)
