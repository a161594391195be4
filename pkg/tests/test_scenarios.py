"""
Scenario library, file loading, short runs, design verification and the CLI
"""
import csv

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cli import main as cli_main
from scenarios import (
    builtin_names,
    convergence_study,
    get_builtin,
    load_scenario,
    parse_report,
    run_scenario,
    verify_design,
    viability_gap,
    write_design_file,
)
from utils.errors import ScenarioValidationError, StepSizeError

BUILTINS = ["clipped_sine", "clipped_sine_bv", "diode_circuit", "linear_decay", "saturated_observer"]


class TestLibrary:
    def test_names(self):
        assert builtin_names() == BUILTINS

    @pytest.mark.parametrize("name", BUILTINS)
    def test_builtin_designs_are_certified(self, name):
        scenario = get_builtin(name)
        assert scenario.design.gamma > 0
        assert scenario.design.residual <= 1e-10
        assert scenario.description

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            get_builtin("parabola")


class TestLoader:
    def test_scenario_with_design_file(self, data_dir):
        scenario = load_scenario(data_dir / "scenarios" / "clipped_sine.json")
        assert scenario.name == "clipped_sine_file"
        assert scenario.viability
        assert_allclose(scenario.design.K, [[-2.0, -2.0]])
        assert scenario.design.gamma > 0

    def test_synthesized_design(self, data_dir):
        scenario = load_scenario(data_dir / "scenarios" / "scalar_synthesized.json")
        assert_allclose(scenario.design.Pi, [[1.0]], atol=1e-10)
        assert_allclose(scenario.design.M_ff, [[1.5]], atol=1e-10)
        assert scenario.design.K.shape == (1, 1)
        assert scenario.design.gamma > 0

    def test_mismatched_constraint_output(self, data_dir):
        with pytest.raises(ScenarioValidationError) as excinfo:
            load_scenario(data_dir / "scenarios" / "mismatched_output.json")
        assert "exosystem.H" in excinfo.value.field
        assert "H_r = H Pi" in excinfo.value.detail

    def test_json_syntax_error_has_position(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{\n  "name": \n}\n')
        with pytest.raises(ScenarioValidationError) as excinfo:
            load_scenario(path)
        assert excinfo.value.field == f"{path}:3:1"

    def test_missing_key(self, tmp_path, data_dir):
        path = tmp_path / "no_plant.json"
        path.write_text('{"name": "x", "exosystem": {}}')
        with pytest.raises(ScenarioValidationError) as excinfo:
            load_scenario(path)
        assert excinfo.value.field.endswith("scenario.plant")

    def test_unknown_file_or_name(self):
        with pytest.raises(KeyError):
            load_scenario("no_such_scenario")


class TestVerifyDesign:
    @pytest.mark.parametrize("name", ["clipped_sine", "diode_circuit", "saturated_observer"])
    def test_data_files_pass(self, data_dir, name):
        result = verify_design(data_dir / "designs" / f"{name}.json")
        assert result.passed, result.failures
        assert dict(result.items)["passed"] is True

    def test_indefinite_certificate(self, data_dir):
        result = verify_design(data_dir / "designs" / "indefinite_certificate.json")
        assert not result.passed
        assert any("not positive definite" in failure for failure in result.failures)

    def test_exported_builtin_verifies(self, tmp_path):
        path = write_design_file(get_builtin("saturated_observer"), tmp_path / "observer.json")
        result = verify_design(path)
        assert result.passed, result.failures
        assert dict(result.items)["observer.feasible"]


class TestRun:
    def test_short_run_writes_outputs(self, settings):
        result = run_scenario("linear_decay", horizon=0.1, settings=settings)
        assert set(result.files) == {"trajectory", "error", "report"}
        for path in result.files.values():
            assert path.parent == settings.output_dir / "linear_decay"

        with open(result.files["error"], newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["t", "w1", "e1", "V", "jump_flag"]
        assert len(rows) == 12

        report = parse_report(result.files["report"].read_text())
        assert report["scenario"] == "linear_decay"
        assert report["steps"] == "10"
        assert report["jumps"] == "0"
        assert report["lyapunov.monotone"] == "true"

    def test_report_is_deterministic(self, tmp_path, settings):
        first = run_scenario("linear_decay", horizon=0.1, out_dir=tmp_path / "a", settings=settings)
        second = run_scenario("linear_decay", horizon=0.1, out_dir=tmp_path / "b", settings=settings)
        assert first.files["report"].read_text() == second.files["report"].read_text()

    def test_tracking_error_decays(self, settings):
        result = run_scenario("linear_decay", settings=settings, write=False)
        assert not result.files
        # e' = -e from e(0) = 1
        assert result.item("terminal_tracking_error") == pytest.approx(np.exp(-2.0), rel=2e-2)
        assert result.verdict.monotone

    def test_viability_channel_recorded(self, settings):
        result = run_scenario("clipped_sine", horizon=0.5, settings=settings, write=False)
        assert result.u_eta.shape == (len(result.trajectory), 1)
        assert result.u_eta_feedback.shape == result.u_eta.shape
        assert result.item("viability.feedback_gap") >= 0.0

    def test_no_viability_channel_without_viability(self, settings):
        result = run_scenario("linear_decay", horizon=0.1, settings=settings, write=False)
        assert result.u_eta is None and result.u_eta_feedback is None
        assert "viability.feedback_gap" not in dict(result.items)

    def test_viability_gap_skips_segment_ends(self):
        feedback = np.array([0.0, 1.0, 1.0, 1.0, 1.0, 0.0]).reshape(-1, 1)
        recorded = np.array([0.0, 0.3, 1.0, 1.02, 0.9, 0.0]).reshape(-1, 1)
        flags = np.zeros(6, dtype=bool)
        assert viability_gap(recorded, feedback, flags) == pytest.approx(0.02)
        flags[3] = True
        assert viability_gap(recorded, feedback, flags) == pytest.approx(0.0)
        assert viability_gap(recorded, np.zeros_like(feedback), np.zeros(6, dtype=bool)) == 0.0


class TestConvergenceStudy:
    def test_needs_three_step_sizes(self):
        with pytest.raises(StepSizeError):
            convergence_study("linear_decay", [1e-2, 5e-3])

    def test_step_sizes_share_a_grid(self):
        with pytest.raises(StepSizeError):
            convergence_study("linear_decay", [2.5e-3, 2e-3, 1e-3])

    def test_linear_decay_is_first_order(self, settings):
        table = convergence_study("linear_decay", [4e-2, 2e-2, 1e-2], horizon=1.0, settings=settings)
        assert table.error is None
        assert table.reference_dt == pytest.approx(2.5e-3)
        assert 0.8 <= table.order <= 1.2
        assert table.errors[0] > table.errors[1] > table.errors[2]


class TestCli:
    def test_list(self, capsys):
        assert cli_main(["list"]) == 0
        out = capsys.readouterr().out
        for name in BUILTINS:
            assert name in out

    def test_verify(self, data_dir, capsys):
        assert cli_main(["verify", str(data_dir / "designs" / "clipped_sine.json")]) == 0
        assert "passed: true" in capsys.readouterr().out
        assert cli_main(["verify", str(data_dir / "designs" / "indefinite_certificate.json")]) == 1

    def test_run(self, tmp_path, capsys):
        assert cli_main(["run", "linear_decay", "--horizon", "0.1", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "linear_decay" / "report.txt").exists()
        assert "✅ linear_decay" in capsys.readouterr().out

    def test_run_unknown_scenario(self, tmp_path):
        assert cli_main(["run", "parabola", "--out", str(tmp_path)]) == 1

    def test_bad_environment(self, monkeypatch):
        monkeypatch.setenv("EVI_TOL", "not-a-number")
        assert cli_main(["list"]) == 2

    def test_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            cli_main(["study", "linear_decay"])
        assert excinfo.value.code == 2
