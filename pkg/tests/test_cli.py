from unittest.mock import patch

import pytest

from cli import EXIT_ABORTED, EXIT_INFEASIBLE, EXIT_OK, EXIT_PARSE, EXIT_SPAN, main, parse_command, split_overrides
from configuration.loader import MODEL_SECTIONS, SCENARIO_SECTIONS, save_model, save_scenario
from conftest import CONFIG_DIR
from models.command import CommandName
from models.errors import ConfigParseError, SimulationAbortedError, SpanMismatchError

FULL = str(CONFIG_DIR / "full_scale.ini")
CONSTRAINTS = str(CONFIG_DIR / "lab_constraints.ini")


@pytest.fixture
def small_configs(tmp_path, small_model, small_scenario):
    model_path = tmp_path / "small_model.ini"
    scenario_path = tmp_path / "small_scenario.ini"
    model_path.write_text(save_model(small_model))
    scenario_path.write_text(save_scenario(small_scenario))
    return str(model_path), str(scenario_path)


@pytest.fixture
def simulated(small_configs, tmp_output):
    model_path, scenario_path = small_configs
    assert main(["simulate", "--model", model_path, "--scenario", scenario_path,
                 "--out-dir", str(tmp_output)]) == EXIT_OK
    [csv] = sorted(tmp_output.glob("*.csv"))
    return csv


# --- Parsing Tests ---
def test_parse_command():
    spec = parse_command(["simulate", "--model", "m.ini", "--scenario", "s.ini", "--dt", "0.5",
                          "--override", "scenario.duration=600", "--autotune"])
    assert spec.command == CommandName.SIMULATE
    assert spec.dt == 0.5
    assert spec.overrides == ["scenario.duration=600"]
    assert spec.autotune


def test_overrides_route_by_section_kind():
    routed = split_overrides(
        ["segment S1.length_l=90", "scenario.duration=600"],
        [("model", MODEL_SECTIONS), ("scenario", SCENARIO_SECTIONS)])
    assert routed == {"model": ["segment S1.length_l=90"], "scenario": ["scenario.duration=600"]}
    with pytest.raises(ConfigParseError):
        split_overrides(["pump.rise=1"], [("model", MODEL_SECTIONS)])


# --- Validate Tests ---
def test_validate_reference_model(capsys):
    assert main(["validate", "--model", FULL]) == EXIT_OK
    assert "Network valid" in capsys.readouterr().out


def test_validate_unreadable_model(tmp_path, capsys):
    assert main(["validate", "--model", str(tmp_path / "missing.ini")]) == EXIT_PARSE
    assert "cannot read" in capsys.readouterr().err


def test_validate_negative_length(capsys):
    assert main(["validate", "--model", FULL, "--override", "segment S1.length_l=-1"]) == EXIT_PARSE
    assert "Network invalid" in capsys.readouterr().out


# --- Scale Tests ---
def test_scale_writes_report_and_lab_model(tmp_output, capsys):
    assert main(["scale", "--full", FULL, "--lab-constraints", CONSTRAINTS, "--out-dir", str(tmp_output)]) == EXIT_OK
    assert (tmp_output / "scaling_report.txt").exists()
    assert (tmp_output / "scaling_table.csv").exists()
    assert (tmp_output / "lab_model.ini").exists()
    assert "Lab-scale sizing" in capsys.readouterr().out


def test_underpowered_peltier_is_infeasible(tmp_output, capsys):
    code = main(["scale", "--full", FULL, "--lab-constraints", CONSTRAINTS, "--out-dir", str(tmp_output),
                 "--override", "thermal_mass_defaults.max_power=30"])
    assert code == EXIT_INFEASIBLE
    assert "INFEASIBLE ThM2" in capsys.readouterr().out


# --- Simulate Tests ---
def test_simulate_writes_trajectory_and_metadata(simulated):
    assert simulated.with_suffix(".json").exists()
    assert simulated.read_text().startswith("t_s,")


def test_aborted_simulation_exits_with_4(small_configs, tmp_output):
    model_path, scenario_path = small_configs
    with patch("cli.run_job", side_effect=SimulationAbortedError("non-finite state")):
        code = main(["simulate", "--model", model_path, "--scenario", scenario_path, "--out-dir", str(tmp_output)])
    assert code == EXIT_ABORTED


def test_unstable_step_is_rejected(small_configs, tmp_output):
    model_path, scenario_path = small_configs
    code = main(["simulate", "--model", model_path, "--scenario", scenario_path,
                 "--out-dir", str(tmp_output), "--dt", "1000"])
    assert code == EXIT_ABORTED


# --- Post-processing Tests ---
def test_nondim_writes_a_copy(simulated, tmp_output):
    assert main(["nondim", str(simulated), "--out-dir", str(tmp_output)]) == EXIT_OK
    written = tmp_output / f"{simulated.stem}_nondim.csv"
    assert written.read_text().startswith("t_star,")


def test_compare_run_with_itself(simulated, tmp_output, capsys):
    assert main(["compare", str(simulated), str(simulated), "--out-dir", str(tmp_output)]) == EXIT_OK
    assert (tmp_output / "comparison_overlay.csv").exists()
    assert "Full-scale vs lab-scale" in capsys.readouterr().out


def test_compare_span_mismatch_exits_with_5(simulated, tmp_output):
    with patch("cli.compare_runs", side_effect=SpanMismatchError("t* spans do not overlap")):
        assert main(["compare", str(simulated), str(simulated), "--out-dir", str(tmp_output)]) == EXIT_SPAN


def test_metrics_of_a_run(simulated, small_configs, tmp_output, capsys):
    model_path, scenario_path = small_configs
    code = main(["metrics", str(simulated), "--model", model_path, "--scenario", scenario_path,
                 "--out-dir", str(tmp_output)])
    assert code == EXIT_OK
    assert (tmp_output / f"{simulated.stem}_losses.csv").exists()
    assert "Experiment metrics" in capsys.readouterr().out
