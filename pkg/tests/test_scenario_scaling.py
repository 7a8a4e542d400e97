import pandas as pd
import pytest

from models.control import ControllerConfig, PidConfig
from models.errors import BaseMismatchError, MissingChannelsError
from models.scenario import ExperimentScenario, OccupancyWindow, PhaseInterval, PhaseLabel, Profile
from models.similitude import NondimBase
from models.simulation import RunMetadata, SimulationTrajectory
from similitude.scenario_scaling import ScenarioScaler, scale_scenario
from similitude.trajectory import nondimensionalize_trajectory, pipe_balance_residual
from thermal.simulator import simulate

FULL_BASE = NondimBase(rho=971.0, mdot_I=20.0, T_s=80.0, D=0.1)
LAB_BASE = NondimBase(rho=994.0, mdot_I=0.0862, T_s=36.0, D=0.012)


def _trajectory(frame: pd.DataFrame, base: NondimBase = LAB_BASE, **extra) -> SimulationTrajectory:
    metadata = RunMetadata(model_hash="m", scenario_hash="s", dt=1.0, output_interval=10.0, subsegments=1,
                           base=base, extra=extra)
    return SimulationTrajectory(frame=frame, metadata=metadata)


# --- Scenario Scaling Tests ---
def test_scaler_maps_time_and_temperature():
    scaler = ScenarioScaler(FULL_BASE, LAB_BASE, {"ThM1": 20.0}, {"ThM1": 26.0})
    assert scaler.time(12 * 3600.0) == pytest.approx(12 * 3600.0 * 0.41043, rel=1e-4)
    assert scaler.temperature(80.0) == pytest.approx(36.0)
    assert scaler.mass_temperature("ThM1", 20.0) == pytest.approx(26.0)
    assert scaler.mass_temperature("ThM1", 22.0) == pytest.approx(26.9)
    assert scaler.mass_temperature("ThM2", 20.0) == pytest.approx(9.0)


def test_pid_gains_keep_the_valve_command():
    scaler = ScenarioScaler(FULL_BASE, LAB_BASE)
    full = PidConfig(kp=0.8, ki=2e-4, kd=5.0, sample_time=60.0)
    lab = scaler.pid(full)
    # A full-scale error e held for one full sample maps to e·k_T held for the scaled sample.
    error = 1.5
    full_command = full.kp * error + full.ki * error * full.sample_time + full.kd * error / full.sample_time
    lab_error = error * scaler.k_T
    lab_command = lab.kp * lab_error + lab.ki * lab_error * lab.sample_time + lab.kd * lab_error / lab.sample_time
    assert lab_command == pytest.approx(full_command)


def test_full_scenario_maps_onto_the_lab(full_scenario):
    scaled = scale_scenario(full_scenario, FULL_BASE, LAB_BASE, {"ThM1": 20.0, "ThM2": 20.0},
                            {"ThM1": 28.0, "ThM2": 28.0}, room_ambient=22.0)
    assert scaled.duration == pytest.approx(70920.0, rel=1e-3)
    window = scaled.occupancy_windows["ThM1"][0]
    assert window.start == pytest.approx(17730.0, rel=1e-3)
    assert window.heating_setpoint == pytest.approx(28.0)
    assert window.cooling_setpoint == 0.0
    assert scaled.ambient_profile.value(1000.0) == 22.0
    assert scaled.ambient_to_emulate.value(scaled.duration / 8) == pytest.approx(-8.0)
    assert scaled.temperature_ratio_kT == pytest.approx(0.45)
    assert scaled.full_scale_setpoints == {"ThM1": 20.0, "ThM2": 20.0}
    assert scaled.controller_config.pid.sample_time == pytest.approx(60.0 * 0.41043, rel=1e-4)


def test_scaling_without_room_ambient_scales_the_ambient():
    scenario = ExperimentScenario(duration=3600.0, ambient_profile=Profile.constant(-5.0), output_interval=60.0)
    scaled = scale_scenario(scenario, FULL_BASE, LAB_BASE)
    assert scaled.ambient_profile.value(0.0) == pytest.approx(-2.25)
    assert scaled.ambient_to_emulate is None


def test_scaling_there_and_back_restores_the_scenario():
    scenario = ExperimentScenario(
        duration=7200.0,
        occupancy_windows={"ThM": [OccupancyWindow(start=600.0, end=3600.0, heating_setpoint=20.0)]},
        phase_labels=[PhaseInterval(label=PhaseLabel.HEATING, start=600.0, end=3600.0)],
        controller_config=ControllerConfig(pid=PidConfig(kp=0.5, ki=1e-3, sample_time=60.0)),
        output_interval=60.0,
    )
    there = scale_scenario(scenario, FULL_BASE, LAB_BASE)
    back = scale_scenario(there, LAB_BASE, FULL_BASE)
    assert back.duration == pytest.approx(7200.0)
    assert back.phase_labels[0].start == pytest.approx(600.0)
    assert back.controller_config.pid.kp == pytest.approx(0.5)
    assert back.occupancy_windows["ThM"][0].heating_setpoint == pytest.approx(20.0)


# --- Trajectory Tests ---
def test_trajectory_columns_move_to_star_axes():
    frame = pd.DataFrame({
        "t_s": [0.0, 10.0],
        "T_s_C": [36.0, 36.0],
        "T_ThM_C": [28.0, 29.8],
        "Q_in_ThM_W": [LAB_BASE.power_unit, 2 * LAB_BASE.power_unit],
        "dP_S_Pa": [LAB_BASE.pressure_unit, 0.0],
        "mdot_S_kgps": [0.0862, 0.0431],
        "u_V": [1.0, 0.5],
    })
    nd = nondimensionalize_trajectory(_trajectory(frame, thermal_mass_setpoints={"ThM": 28.0}), LAB_BASE)
    assert nd.metadata.nondimensional
    assert nd.frame["t_star"].iloc[1] == pytest.approx(10.0 / LAB_BASE.time_unit)
    assert nd.frame["T_s_star"].tolist() == pytest.approx([1.0, 1.0])
    assert nd.frame["T_ThM_star"].tolist() == pytest.approx([0.0, 0.05])
    assert nd.frame["Q_in_ThM_star"].tolist() == pytest.approx([1.0, 2.0])
    assert nd.frame["dP_S_star"].iloc[0] == pytest.approx(1.0)
    assert nd.frame["mdot_S_star"].tolist() == pytest.approx([1.0, 0.5])
    assert nd.frame["u_V"].tolist() == [1.0, 0.5]
    assert nd.frame["t_s"].tolist() == [0.0, 10.0]


def test_second_nondimensionalization_is_rejected():
    frame = pd.DataFrame({"t_s": [0.0], "T_s_C": [36.0]})
    nd = nondimensionalize_trajectory(_trajectory(frame), LAB_BASE)
    with pytest.raises(BaseMismatchError, match="already"):
        nondimensionalize_trajectory(nd, LAB_BASE)


def test_wrong_base_is_rejected():
    frame = pd.DataFrame({"t_s": [0.0], "T_s_C": [36.0]})
    with pytest.raises(BaseMismatchError):
        nondimensionalize_trajectory(_trajectory(frame), FULL_BASE)


def test_simulated_pipe_follows_its_nondimensional_balance(small_model):
    scenario = ExperimentScenario(duration=120.0, ambient_profile=Profile.constant(22.0), subsegments=1,
                                  output_interval=1.0, supply_profile=Profile(points=[(0.0, 36.0), (120.0, 30.0)]))
    trajectory = simulate(small_model, scenario)
    base = NondimBase.from_model(small_model)
    nd = nondimensionalize_trajectory(trajectory, base, small_model)
    residual = pipe_balance_residual(nd, small_model, base, "S")
    scale = nd.frame["T_S_star"].diff().abs().max() / nd.frame["t_star"].diff().max()
    assert residual < 1e-2 * scale


def test_pipe_balance_needs_its_channels(small_model):
    frame = pd.DataFrame({"t_s": [0.0, 1.0], "T_s_C": [36.0, 36.0]})
    nd = nondimensionalize_trajectory(_trajectory(frame, NondimBase.from_model(small_model)),
                                      NondimBase.from_model(small_model))
    with pytest.raises(MissingChannelsError):
        pipe_balance_residual(nd, small_model, NondimBase.from_model(small_model), "S")
