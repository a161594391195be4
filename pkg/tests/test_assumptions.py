"""
Well-posedness checks on quarter-plane systems
"""
import numpy as np
import pytest

from integrator import EviSystem, check_assumptions
from utils.errors import AssumptionViolation, DimensionError

from conftest import orthant_set, quarter_plane_system


def by_name(report):
    return {check.name: check for check in report.checks()}


class TestQuarterPlane:
    def test_symmetric_feedthrough_passes(self, symmetric_feedthrough_system):
        report = check_assumptions(symmetric_feedthrough_system, np.eye(2))
        assert report.all_passed, report.failures()
        assert report.failures() == []
        np.testing.assert_array_equal(report.certificate_P, np.eye(2))

    def test_sampled_checks_are_flagged(self, symmetric_feedthrough_system):
        checks = by_name(check_assumptions(symmetric_feedthrough_system, np.eye(2)))
        assert not checks["A3 constraint qualification"].exhaustive
        assert not checks["A4 range intersection"].exhaustive
        assert checks["A5 range inclusion"].exhaustive

    def test_skew_feedthrough_misses_range_intersection(self, skew_feedthrough_system):
        report = check_assumptions(skew_feedthrough_system, np.eye(2))
        checks = by_name(report)
        for name in ("A1 kernel inclusion", "A1 J psd", "A2 Lipschitz", "A3 constraint qualification",
                     "A5 range inclusion"):
            assert checks[name].passed, name
        assert not checks["A4 range intersection"].passed
        assert checks["A4 range intersection"].margin > 0
        assert report.failures() == ["A4 range intersection"]

    def test_deterministic_for_a_seed(self, skew_feedthrough_system):
        first = check_assumptions(skew_feedthrough_system, np.eye(2), seed=7)
        second = check_assumptions(skew_feedthrough_system, np.eye(2), seed=7)
        assert [c.margin for c in first.checks()] == [c.margin for c in second.checks()]


class TestFailures:
    def test_kernel_inclusion_witness(self):
        system = EviSystem(
            A=np.zeros((2, 2)), G=np.eye(2), H=np.diag([1.0, 2.0]), J=np.zeros((2, 2)),
            moving_set=orthant_set(2),
        )
        check = check_assumptions(system, np.eye(2)).a1_kernel_inclusion
        assert not check.passed
        assert check.margin == pytest.approx(1.0)
        # PG - H^T = diag(0, -1) only moves the second axis
        assert abs(check.witness[1]) == pytest.approx(1.0)
        assert check.witness[0] == pytest.approx(0.0, abs=1e-12)

    def test_range_inclusion(self):
        system = EviSystem(
            A=np.zeros((2, 2)), G=np.eye(2), H=np.array([[1.0, 0.0], [0.0, 0.0]]), J=np.diag([0.0, 1.0]),
            moving_set=orthant_set(2),
        )
        report = check_assumptions(system, np.eye(2))
        assert not report.a5_range_inclusion_rgeJ_rgeH.passed
        assert "A5 range inclusion" in report.failures()

    def test_indefinite_feedthrough(self):
        report = check_assumptions(quarter_plane_system(np.diag([1.0, -1.0])), np.eye(2))
        assert not report.a1_J_psd.passed
        assert report.a1_J_psd.margin == pytest.approx(-1.0)

    def test_understated_lipschitz_modulus(self):
        system = EviSystem(
            A=-2.0 * np.eye(2), G=np.eye(2), H=np.eye(2), J=np.zeros((2, 2)),
            moving_set=orthant_set(2), lipschitz_modulus=1.0,
        )
        check = check_assumptions(system, np.eye(2), n_samples=5).a2_lipschitz
        assert not check.passed
        assert check.margin == pytest.approx(-1.0)

    @pytest.mark.parametrize("P", [np.diag([1.0, -1.0]), np.array([[1.0, 0.5], [0.0, 1.0]])])
    def test_certificate_must_be_spd(self, symmetric_feedthrough_system, P):
        with pytest.raises(AssumptionViolation) as excinfo:
            check_assumptions(symmetric_feedthrough_system, P)
        assert excinfo.value.assumption == "A1"

    def test_certificate_shape(self, symmetric_feedthrough_system):
        with pytest.raises(DimensionError):
            check_assumptions(symmetric_feedthrough_system, np.eye(3))
