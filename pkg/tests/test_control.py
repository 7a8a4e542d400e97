import pytest

from conftest import single_loop_model
from control.autotune import RelayController, relay_autotune, ziegler_nichols
from control.occupancy import OccupancyController, OpenLoopController, PeltierCommands, occupancy_setpoint
from control.peltier_tracking import PeltierTracker, peltier_tracking_step
from control.pid import pid_step
from models.control import ControllerConfig, PidConfig, PidState
from models.errors import InsufficientSignalError, UnknownThermalMassError
from models.network import PeltierUnit
from models.scenario import ExperimentScenario, OccupancyWindow, Profile
from thermal.simulator import initial_state, simulate


# --- PID Tests ---
def test_pid_proportional_and_integral_terms():
    cfg = PidConfig(kp=0.5, ki=0.01, kd=0.0, u_min=-10.0, u_max=10.0)
    output, state = pid_step(cfg, PidState(), setpoint=28.0, measurement=27.0, dt=10.0)
    assert output == pytest.approx(0.5 + 0.01 * 10.0)
    assert state.integral == pytest.approx(10.0)
    assert state.previous_error == 1.0


def test_pid_derivative_uses_previous_error():
    cfg = PidConfig(kp=0.0, ki=0.0, kd=2.0, u_min=-10.0, u_max=10.0)
    _, state = pid_step(cfg, PidState(), 28.0, 27.0, 1.0)
    output, _ = pid_step(cfg, state, 28.0, 27.5, 1.0)
    assert output == pytest.approx(2.0 * (0.5 - 1.0))


def test_pid_output_is_clamped_and_integrator_frozen():
    cfg = PidConfig(kp=1.0, ki=0.1)
    output, state = pid_step(cfg, PidState(integral=5.0), 28.0, 20.0, 10.0)
    assert output == 1.0
    assert state.integral == 5.0


def test_pid_without_anti_windup_keeps_integrating():
    cfg = PidConfig(kp=1.0, ki=0.1, anti_windup=False)
    _, state = pid_step(cfg, PidState(integral=5.0), 28.0, 20.0, 10.0)
    assert state.integral == pytest.approx(85.0)


# --- Peltier Tracking Tests ---
def test_tracking_without_time_constant_is_immediate():
    unit = PeltierUnit(max_power=50.0)
    assert peltier_tracking_step(unit, 20.0, 1.0) == 20.0


def test_tracking_is_first_order():
    unit = PeltierUnit(max_power=50.0, tracking_time_constant=10.0)
    applied = peltier_tracking_step(unit, 20.0, 10.0, applied=0.0)
    assert applied == pytest.approx(20.0 * (1.0 - 2.718281828459045 ** -1))


def test_tracker_clamps_and_logs_once(caplog):
    tracker = PeltierTracker({"ThM": PeltierUnit(max_power=50.0)})
    tracker.step({"ThM": 80.0}, 10.0)
    tracker.step({"ThM": 90.0}, 10.0)
    assert tracker.applied["ThM"] == 50.0
    assert caplog.text.count("clamped") == 1


# --- Occupancy Tests ---
def test_setpoint_inside_and_outside_windows():
    scenario = ExperimentScenario(duration=100.0, occupancy_windows={"ThM": [
        OccupancyWindow(start=10.0, end=20.0, heating_setpoint=28.0, cooling_setpoint=15.0)]})
    assert occupancy_setpoint(scenario, "ThM", 5.0) == 15.0
    assert occupancy_setpoint(scenario, "ThM", 10.0) == 28.0
    assert occupancy_setpoint(scenario, "ThM", 20.0) == 15.0


def test_unknown_mass_has_no_schedule():
    scenario = ExperimentScenario(duration=100.0)
    with pytest.raises(UnknownThermalMassError):
        occupancy_setpoint(scenario, "ThM9", 0.0)
    assert occupancy_setpoint(scenario, "ThM", 0.0, known_masses=["ThM"]) == 0.0


def test_occupancy_controller_opens_the_valve_of_a_cold_mass(small_model, occupied_scenario):
    controller = OccupancyController(small_model, occupied_scenario)
    state = initial_state(small_model, occupied_scenario)
    assert controller.update(0.0, state).valve_positions == {"V": 0.0}
    assert controller.update(3600.0, state).valve_positions == {"V": 1.0}


def test_per_mass_gains_win_over_shared(small_model, occupied_scenario):
    config = ControllerConfig(pid=PidConfig(sample_time=10.0), per_mass={"ThM": PidConfig(sample_time=20.0)})
    scenario = occupied_scenario.model_copy(update={"controller_config": config})
    assert OccupancyController(small_model, scenario).sample_time == 20.0
    tuned = {"ThM": PidConfig(sample_time=30.0)}
    assert OccupancyController(small_model, scenario, tuned).sample_time == 30.0


def test_occupancy_controller_integrates_over_the_elapsed_time(small_model, occupied_scenario):
    config = ControllerConfig(pid=PidConfig(kp=0.0, ki=1e-3, sample_time=10.0))
    scenario = occupied_scenario.model_copy(update={"controller_config": config})
    controller = OccupancyController(small_model, scenario)
    state = initial_state(small_model, scenario)
    controller.update(3600.0, state)
    controller.update(3630.0, state)
    # Error of 1 K held for the first sample time, then for the 30 s gap.
    assert controller.states["ThM"].integral == pytest.approx(10.0 + 30.0)


def test_slower_mass_holds_its_command_between_its_own_samples(small_model, occupied_scenario):
    config = ControllerConfig(pid=PidConfig(kp=0.0, ki=1e-3, sample_time=20.0))
    scenario = occupied_scenario.model_copy(update={"controller_config": config})
    controller = OccupancyController(small_model, scenario)
    state = initial_state(small_model, scenario)
    first = controller.update(3600.0, state).valve_positions["V"]
    held = controller.update(3610.0, state).valve_positions["V"]
    assert held == first
    assert controller.states["ThM"].integral == pytest.approx(20.0)
    controller.update(3620.0, state)
    assert controller.states["ThM"].integral == pytest.approx(40.0)


def test_closed_loop_holds_the_occupied_setpoint(small_model, occupied_scenario):
    trajectory = simulate(small_model, occupied_scenario, OccupancyController(small_model, occupied_scenario))
    frame = trajectory.frame
    before = frame[frame["t_s"] < 3600.0]
    assert before["u_V_frac"].max() == 0.0
    late = frame[(frame["t_s"] >= 6600.0) & (frame["t_s"] < 7200.0)]
    assert (late["setpoint_ThM_C"] == 28.0).all()
    assert late["T_ThM_C"].mean() == pytest.approx(28.0, abs=0.5)


def test_peltier_emulates_the_full_scale_ambient():
    model = single_loop_model(peltier=True)
    scenario = ExperimentScenario(duration=600.0, ambient_profile=Profile.constant(22.0),
                                  ambient_to_emulate=Profile.constant(-5.0), temperature_ratio_kT=0.45,
                                  full_scale_setpoints={"ThM": 20.0}, output_interval=60.0)
    commands = PeltierCommands(model, scenario)
    assert commands(0.0) == {"ThM": pytest.approx(2.5 * ((22.0 - 28.0) - 0.45 * (-5.0 - 20.0)))}

    trajectory = simulate(model, scenario, OpenLoopController(model, scenario, sample_time=60.0))
    assert trajectory.column("T_a_sim_ThM_C").tolist() == pytest.approx([28.0 - 0.45 * 25.0] * len(trajectory))


def test_peltier_stays_off_without_k_T(caplog):
    model = single_loop_model(peltier=True)
    scenario = ExperimentScenario(duration=60.0, ambient_to_emulate=Profile.constant(-5.0))
    assert PeltierCommands(model, scenario)(0.0) == {}
    assert "without temperature_ratio_kT" in caplog.text


# --- Autotune Tests ---
def test_ziegler_nichols_rule():
    tuned = ziegler_nichols(2.0, 100.0, PidConfig(sample_time=10.0))
    assert tuned.kp == pytest.approx(1.2)
    assert tuned.ki == pytest.approx(1.2 / 50.0)
    assert tuned.kd == pytest.approx(1.2 * 100.0 / 8.0)
    assert tuned.sample_time == 10.0


def test_relay_switches_around_the_setpoint(small_model, small_scenario):
    relay = RelayController(small_model, small_scenario, "ThM", setpoint=28.0, sample_time=10.0)
    cold = initial_state(small_model, small_scenario)
    assert relay.update(0.0, cold).valve_positions["V"] == 1.0
    hot = cold.model_copy(update={"thermal_mass_temperatures": {"ThM": 29.0}})
    assert relay.update(10.0, hot).valve_positions["V"] == 0.0


def test_dithered_relay_still_closes_the_valve(small_model, small_scenario):
    relay = RelayController(small_model, small_scenario, "ThM", setpoint=28.0, sample_time=10.0, amplitude=0.49)
    cold = initial_state(small_model, small_scenario)
    assert relay.update(0.0, cold).valve_positions["V"] == pytest.approx(0.98)
    hot = cold.model_copy(update={"thermal_mass_temperatures": {"ThM": 29.0}})
    assert relay.update(10.0, hot).valve_positions["V"] == 0.0


def test_relay_autotune_is_seeded(small_model):
    scenario = ExperimentScenario(duration=14400.0, ambient_profile=Profile.constant(22.0), output_interval=10.0)
    first = relay_autotune(small_model, scenario, "ThM", seed=7)
    second = relay_autotune(small_model, scenario, "ThM", seed=7)
    assert first == second
    assert first.kp > 0
    assert first.ki > 0


def test_short_relay_test_is_rejected(small_model):
    scenario = ExperimentScenario(duration=120.0, ambient_profile=Profile.constant(22.0), output_interval=10.0)
    with pytest.raises(InsufficientSignalError):
        relay_autotune(small_model, scenario, "ThM", seed=7)


@pytest.mark.parametrize("tm_id", ["ThM1", "ThM2"])
def test_shipped_lab_gains_come_from_the_relay_test(lab_model, lab_scenario, tm_id):
    scenario = lab_scenario.model_copy(update={"duration": 14400.0, "supply_profile": None, "occupancy_windows": {}})
    shipped = lab_scenario.controller_config.for_mass(tm_id)
    tuned = relay_autotune(lab_model, scenario, tm_id, seed=0)
    assert tuned.kp == pytest.approx(shipped.kp, rel=0.25)
    assert tuned.ki == pytest.approx(shipped.ki, rel=0.25)
    assert tuned.kd == pytest.approx(shipped.kd, rel=0.25)
