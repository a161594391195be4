"""
Time stepping, the jump map and trajectory export
"""
import csv

import numpy as np
import pytest
from numpy.testing import assert_allclose

from geometry import ConstantSignal, MovingSet, PolyhedralCone, StaircaseSignal, project_onto_set
from integrator import (
    EviSystem,
    Trajectory,
    jump_map,
    lipschitz_estimate,
    prepare_step,
    ramp_jump_oracle,
    resolve_jump,
    simulate,
    step,
    trajectory_header,
    write_trajectory_csv,
)
from scenarios import get_builtin
from utils.errors import SimulationError, StepSizeError

from conftest import orthant_set, quarter_plane_system

ONE = np.array([[1.0]])


def decay_system(offset: float = 10.0) -> EviSystem:
    """x' = -x behind x >= -offset"""
    return EviSystem(A=-ONE, G=ONE, H=ONE, J=np.zeros((1, 1)), moving_set=orthant_set(1, np.array([offset])))


def pushed_system() -> EviSystem:
    """x' = -1 + eta with x >= 0"""
    return EviSystem(
        A=np.zeros((1, 1)), G=ONE, H=ONE, J=np.zeros((1, 1)), moving_set=orthant_set(1),
        B=ONE, u=ConstantSignal([-1.0]),
    )


def sweeping_system(cone: PolyhedralCone, offset: np.ndarray) -> EviSystem:
    d = cone.dim
    return EviSystem(
        A=np.zeros((d, d)), G=np.eye(d), H=np.eye(d), J=np.zeros((d, d)),
        moving_set=MovingSet(cone, ConstantSignal(offset)),
    )


class TestStep:
    def test_single_implicit_step(self):
        x_next, eta = step(decay_system(), 0.0, np.array([1.0]), 0.1)
        assert x_next[0] == pytest.approx(1.0 / 1.1)
        assert_allclose(eta, 0.0)

    def test_rejects_bad_step_sizes(self):
        system = decay_system()
        for dt in (0.0, -1e-3, float("nan")):
            with pytest.raises(StepSizeError):
                prepare_step(system, dt)

    def test_singular_implicit_operator(self):
        system = EviSystem(A=ONE, G=ONE, H=ONE, J=np.zeros((1, 1)), moving_set=orthant_set(1))
        with pytest.raises(StepSizeError):
            prepare_step(system, 1.0)


class TestSimulate:
    def test_inactive_decay_is_first_order(self):
        errors = []
        for dt in (2e-3, 1e-3):
            traj = simulate(decay_system(), np.array([1.0]), 1.0, dt)
            assert traj.states[0, 0] == pytest.approx(1.0)
            assert_allclose(traj.multipliers, 0.0)
            errors.append(abs(traj.final_state[0] - np.exp(-1.0)))
        assert errors[1] <= 1e-3
        assert errors[0] / errors[1] == pytest.approx(2.0, rel=0.05)

    def test_constraint_holds_the_state(self):
        traj = simulate(pushed_system(), np.array([1.0]), 2.0, 1e-2)
        assert np.all(traj.states[:, 0] >= -1e-12)
        assert traj.final_state[0] == pytest.approx(0.0, abs=1e-12)
        assert traj.multipliers[-1, 0] == pytest.approx(1.0)
        assert traj.max_residual <= 1e-9
        assert not traj.jumps

    def test_clipped_reference_stays_below_its_bound(self):
        exo = get_builtin("clipped_sine").exo
        traj = simulate(exo, np.array([0.0, 0.999]), 0.3, 1e-3)
        assert not traj.jumps
        assert np.max(traj.states[:, 1]) <= 1.0 + 1e-6
        # -2 x_r1 + x_r2 > 0 until x_r1 reaches 1/2, so it is still sliding at t = 0.3
        assert traj.final_state[1] == pytest.approx(1.0, abs=1e-6)
        assert traj.multipliers[-1, 0] > 0.0

    def test_sliding_step_matches_fine_steps(self):
        exo = get_builtin("clipped_sine").exo
        x0 = np.array([0.0, 1.0])
        gaps = []
        for dt in (4e-2, 2e-2, 1e-2):
            x_next, eta = step(exo, 0.0, x0, dt)
            fine = simulate(exo, x0, dt, dt / 100).final_state
            assert eta[0] > 0.0
            assert x_next[1] == pytest.approx(1.0, abs=1e-8)
            assert fine[1] == pytest.approx(1.0, abs=1e-8)
            gaps.append(float(np.linalg.norm(x_next - fine)))
        # first-order constant taken from the coarsest step
        constant = gaps[0] / 4e-2
        for gap, dt in zip(gaps[1:], (2e-2, 1e-2)):
            assert gap <= 1.5 * constant * dt
        assert gaps[-1] <= 1e-3

    def test_inadmissible_start_is_an_initial_jump(self):
        system = EviSystem(A=np.zeros((1, 1)), G=ONE, H=ONE, J=np.zeros((1, 1)), moving_set=orthant_set(1))
        traj = simulate(system, np.array([-1.0]), 0.1, 0.01)
        assert traj.jump_flags[0]
        assert len(traj.jumps) == 1
        assert traj.jumps[0].size == pytest.approx(1.0)
        assert traj.states[0, 0] == pytest.approx(0.0)

    def test_horizon_must_be_a_multiple_of_dt(self):
        with pytest.raises(StepSizeError):
            simulate(decay_system(), np.array([1.0]), 1.0, 0.3)
        with pytest.raises(StepSizeError):
            simulate(decay_system(), np.array([1.0]), 0.0, 0.1)

    def test_failure_is_tagged_with_time(self):
        # G = 0: the multiplier cannot hold the state once it leaves the set
        system = EviSystem(
            A=np.zeros((1, 1)), G=np.zeros((1, 1)), H=ONE, J=np.zeros((1, 1)), moving_set=orthant_set(1),
            B=ONE, u=ConstantSignal([-1.0]),
        )
        with pytest.raises(SimulationError) as excinfo:
            simulate(system, np.array([0.5]), 1.0, 0.1)
        assert excinfo.value.t == pytest.approx(0.6)

    def test_contraction_in_certificate_metric(self, symmetric_feedthrough_system):
        system = EviSystem(
            A=-np.eye(2),
            G=symmetric_feedthrough_system.G,
            H=symmetric_feedthrough_system.H,
            J=symmetric_feedthrough_system.J,
            moving_set=symmetric_feedthrough_system.moving_set,
            B=np.eye(2),
            u=ConstantSignal([-1.0, -0.5]),
        )
        a = simulate(system, np.array([2.0, 1.0]), 3.0, 1e-2)
        b = simulate(system, np.array([0.5, 3.0]), 3.0, 1e-2)
        gap = np.linalg.norm(a.states - b.states, axis=1)
        assert np.all(np.diff(gap) <= 1e-12)
        assert gap[-1] < gap[0]


class TestJumpMap:
    def test_projection_for_sweeping_data(self, rng):
        for _ in range(1000):
            d = int(rng.integers(1, 4))
            cone = PolyhedralCone(face_matrix=np.eye(d) + 0.3 * rng.uniform(-1, 1, size=(d, d)))
            offset = rng.normal(size=d)
            system = sweeping_system(cone, offset)
            x_minus = rng.normal(size=d) * 2
            expected = project_onto_set(system.moving_set, 0.0, x_minus)
            assert_allclose(jump_map(system, 0.0, x_minus), expected, atol=1e-10)

    def test_admissible_state_does_not_jump(self):
        outcome = resolve_jump(quarter_plane_system(np.zeros((2, 2))), 0.0, np.array([1.0, 2.0]))
        assert not outcome.jumped
        assert_allclose(outcome.x_plus, [1.0, 2.0])

    def test_staircase_jump_matches_ramp(self):
        offset = StaircaseSignal([0.0, 1.0], [[0.0, 0.0], [-0.5, -0.2]])
        system = EviSystem(
            A=-np.eye(2), G=np.eye(2), H=np.eye(2), J=np.zeros((2, 2)),
            moving_set=MovingSet(PolyhedralCone.orthant(2), offset, "right_continuous_bv"),
        )
        x_minus = np.array([0.1, 0.3])
        x_plus = jump_map(system, 1.0, x_minus)
        assert_allclose(x_plus, [0.5, 0.3])
        assert_allclose(ramp_jump_oracle(system, 1.0, x_minus), x_plus, atol=1e-4)

    def test_circuit_staircase_matches_ramp(self):
        plant = get_builtin("diode_circuit").plant
        x_minus = np.array([0.05, 0.0])
        x_plus = jump_map(plant, 0.1, x_minus)
        oracle = ramp_jump_oracle(plant, 0.1, x_minus, width=1e-9)
        assert_allclose(oracle, x_plus, atol=1e-4)


class TestTrajectoryOutput:
    def test_header(self):
        assert trajectory_header(2, 1) == ["t", "x1", "x2", "eta1", "v1", "jump_flag"]

    def test_write_csv(self, tmp_path):
        traj = simulate(pushed_system(), np.array([0.05]), 0.1, 1e-2)
        path = write_trajectory_csv(traj, tmp_path / "trajectory.csv")
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["t", "x1", "eta1", "v1", "jump_flag"]
        assert len(rows) == len(traj) + 1
        assert float(rows[-1][0]) == traj.times[-1]
        assert float(rows[-1][1]) == traj.final_state[0]

    def test_lipschitz_estimate(self):
        traj = simulate(decay_system(), np.array([1.0]), 1.0, 1e-3)
        assert traj.lipschitz == pytest.approx(1.0, rel=1e-2)
        assert lipschitz_estimate(traj) == traj.lipschitz

    def test_lipschitz_estimate_needs_two_samples(self):
        traj = Trajectory(
            times=np.zeros(1), states=np.zeros((1, 1)), multipliers=np.zeros((1, 1)),
            constraint_values=np.zeros((1, 1)),
        )
        with pytest.raises(ValueError):
            lipschitz_estimate(traj)
