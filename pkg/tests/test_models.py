import math

import numpy as np
import pytest
from pydantic import ValidationError

from models.errors import ConfigParseError, DomainError
from models.metrics import EnergyAudit, PhasePartition
from models.network import ValveCharacteristic, ValveModel
from models.scenario import ExperimentScenario, OccupancyWindow, PhaseLabel, Profile
from models.similitude import LabConstraints, NondimBase, TemperatureRatio, ThermalMassConstraint

FULL_BASE = NondimBase(rho=971.0, mdot_I=20.0, T_s=80.0, D=0.1)
LAB_BASE = NondimBase(rho=994.0, mdot_I=0.0862, T_s=36.0, D=0.012)


# --- Nondimensional Base Tests ---
def test_base_units_follow_the_reference_quantities():
    assert FULL_BASE.time_unit == pytest.approx(971.0 * 0.1 ** 3 / 20.0)
    assert FULL_BASE.pressure_unit == pytest.approx(20.0 ** 2 / (971.0 * 0.1 ** 4))
    assert FULL_BASE.power_unit == pytest.approx(20.0 ** 3 / (971.0 ** 2 * 0.1 ** 4))


def test_lab_to_full_ratios():
    assert LAB_BASE.time_unit / FULL_BASE.time_unit == pytest.approx(0.41043, rel=1e-4)
    assert LAB_BASE.power_unit / FULL_BASE.power_unit == pytest.approx(3.68444e-4, rel=1e-4)
    assert TemperatureRatio.between(LAB_BASE, FULL_BASE).k_T == pytest.approx(0.45)


def test_base_rejects_non_positive_values():
    with pytest.raises(ValidationError):
        NondimBase(rho=994.0, mdot_I=0.0, T_s=36.0, D=0.012)


# --- Valve Tests ---
def test_linear_valve_spans_its_k_range():
    valve = ValveModel(id="V", split_node="a", merge_node="b",
                       user_branch_k_range=(0.01, 1.0), bypass_branch_k_range=(0.01, 1.0))
    k_user, k_bypass = valve.branch_coefficients(1.0)
    assert k_user == pytest.approx(0.01)
    assert k_bypass == pytest.approx(1.0)
    assert valve.branch_coefficients(0.0) == pytest.approx((1.0, 0.01))


def test_valve_with_infinite_k_max_closes_fully():
    valve = ValveModel(id="V", split_node="a", merge_node="b",
                       user_branch_k_range=(0.002, math.inf), bypass_branch_k_range=(0.002, math.inf))
    k_user, k_bypass = valve.branch_coefficients(1.0)
    assert k_user == pytest.approx(0.002)
    assert math.isinf(k_bypass)


def test_equal_percentage_needs_finite_range():
    valve = ValveModel(id="V", split_node="a", merge_node="b",
                       user_branch_k_range=(0.002, math.inf), bypass_branch_k_range=(0.002, 1.0),
                       characteristic=ValveCharacteristic.EQUAL_PERCENTAGE)
    with pytest.raises(DomainError):
        valve.branch_coefficients(0.5)


# --- Scenario Tests ---
def test_profile_interpolates_and_holds_ends():
    profile = Profile(points=[(0.0, 10.0), (100.0, 20.0)])
    assert profile.value(50.0) == pytest.approx(15.0)
    assert profile.value(-10.0) == pytest.approx(10.0)
    assert profile.value(500.0) == pytest.approx(20.0)


def test_profile_rejects_decreasing_times():
    with pytest.raises(ValidationError):
        Profile(points=[(10.0, 1.0), (5.0, 2.0)])


def test_overlapping_windows_are_rejected():
    with pytest.raises(ValidationError, match="overlap"):
        ExperimentScenario(duration=100.0, occupancy_windows={"ThM": [
            OccupancyWindow(start=0.0, end=60.0), OccupancyWindow(start=50.0, end=90.0)]})


def test_window_outside_duration_is_rejected():
    with pytest.raises(ValidationError, match="outside duration"):
        ExperimentScenario(duration=100.0, occupancy_windows={"ThM": [OccupancyWindow(start=50.0, end=150.0)]})


# --- Metrics Model Tests ---
def test_phase_mask_is_half_open_except_at_the_end():
    partition = PhasePartition(duration=10.0, intervals={
        PhaseLabel.COOLING: [(0.0, 5.0)], PhaseLabel.HEATING: [(5.0, 10.0)]})
    times = np.array([0.0, 5.0, 10.0])
    assert partition.mask(PhaseLabel.COOLING, times).tolist() == [True, False, False]
    assert partition.mask(PhaseLabel.HEATING, times).tolist() == [False, True, True]
    assert partition.total_time(PhaseLabel.HEATING) == pytest.approx(5.0)


def test_energy_audit_residual():
    audit = EnergyAudit(supplied_J=100.0, pipe_losses_J=20.0, delivered_J=70.0, storage_change_J=5.0)
    assert audit.residual_J == pytest.approx(5.0)
    assert audit.relative_error == pytest.approx(0.05)


# --- Constraint Tests ---
def test_mass_constraints_override_defaults():
    constraints = LabConstraints(
        base=LAB_BASE,
        defaults=ThermalMassConstraint(setpoint_Tset=26.0, max_power=50.0),
        thermal_masses={"ThM2": ThermalMassConstraint(heat_capacity_C=43500.0, max_power=30.0)},
    )
    merged = constraints.for_mass("ThM2")
    assert merged.setpoint_Tset == 26.0
    assert merged.max_power == 30.0
    assert merged.heat_capacity_C == 43500.0
    assert constraints.for_mass("ThM1").heat_capacity_C is None


def test_config_error_message_carries_location():
    error = ConfigParseError("unknown key", line=12, section="segment S1", field="lenght")
    assert str(error) == "line 12 [segment S1] lenght: unknown key"
