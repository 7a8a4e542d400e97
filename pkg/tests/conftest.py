from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from app import app
from configuration.loader import load_lab_constraints, load_model, load_scenario
from models.network import (
    FluidProperties,
    HeatExchanger,
    NetworkModel,
    PeltierUnit,
    PipeSegment,
    SupplyPlant,
    ThermalMass,
    ValveModel,
)
from models.scenario import ExperimentScenario, OccupancyWindow, Profile

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def read_config(name: str) -> str:
    return (CONFIG_DIR / name).read_text()


def single_loop_model(peltier: bool = False, **plant_overrides) -> NetworkModel:
    """One plant, one valve loop, one heat exchanger and one thermal mass at lab scale."""
    plant = {
        "supply_temp_Ts": 36.0,
        "initial_mass_flow_mdotI": 0.05,
        "pump_pressure_rise": 75000.0,
        **plant_overrides,
    }
    return NetworkModel(
        fluid=FluidProperties(rho=994.0, cp=4178.0),
        plant=SupplyPlant(**plant),
        segments=[
            PipeSegment(id="S", length_l=4.0, diameter_D=0.012, loss_coeff_k_tot=0.01,
                        conductive_hAs=0.5, upstream_node="plant_out", downstream_node="split"),
            PipeSegment(id="B", length_l=2.5, diameter_D=0.012, loss_coeff_k_tot=0.005,
                        conductive_hAs=0.23, upstream_node="split", downstream_node="merge"),
            PipeSegment(id="R", length_l=4.0, diameter_D=0.012, loss_coeff_k_tot=0.01,
                        conductive_hAs=0.5, upstream_node="merge", downstream_node="plant_in"),
        ],
        valves=[ValveModel(id="V", split_node="split", merge_node="merge",
                           user_branch_k_range=(0.002, float("inf")),
                           bypass_branch_k_range=(0.002, float("inf")))],
        heat_exchangers=[HeatExchanger(id="HX", convective_hAs_HX=15.5, loss_coeff_k_HX=0.015, volume=3e-4,
                                       upstream_node="split", downstream_node="merge", thermal_mass="ThM")],
        thermal_masses=[ThermalMass(
            id="ThM", heat_capacity_C=30000.0, volume=0.007, hAs_actual=2.5,
            hAs_simulated=2.5 if peltier else None, setpoint_Tset=28.0,
            peltier=PeltierUnit(max_power=50.0, power_setpoint_Qpelt=10.0) if peltier else None,
        )],
        design_ambient=22.0,
        reference_diameter=0.012,
    )


@pytest.fixture
def client():
    return TestClient(app)


@pytest.fixture
def full_config_text():
    return read_config("full_scale.ini")


@pytest.fixture
def full_model(full_config_text):
    return load_model(full_config_text)


@pytest.fixture
def lab_model():
    return load_model(read_config("lab_nominal.ini"))


@pytest.fixture
def lab_constraints():
    return load_lab_constraints(read_config("lab_constraints.ini"))


@pytest.fixture
def lab_scenario():
    return load_scenario(read_config("scenario_lab.ini"))


@pytest.fixture
def full_scenario():
    return load_scenario(read_config("scenario_full.ini"))


@pytest.fixture
def small_model():
    return single_loop_model()


@pytest.fixture
def small_scenario():
    return ExperimentScenario(
        duration=3600.0,
        ambient_profile=Profile.constant(22.0),
        initial_temperatures={"ThM": 26.0},
        output_interval=60.0,
    )


@pytest.fixture
def occupied_scenario():
    return ExperimentScenario(
        duration=7200.0,
        ambient_profile=Profile.constant(22.0),
        occupancy_windows={"ThM": [OccupancyWindow(start=3600.0, end=7200.0, heating_setpoint=28.0)]},
        initial_temperatures={"ThM": 27.0},
        output_interval=60.0,
    )


@pytest.fixture
def tmp_output(tmp_path):
    return tmp_path / "output"
