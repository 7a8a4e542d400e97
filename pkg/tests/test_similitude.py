import math

import numpy as np
import pytest

from control.occupancy import OpenLoopController
from harness.comparison import compare_runs
from models.errors import DomainError
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
from models.scenario import ExperimentScenario, Profile
from models.similitude import LabConstraints, NondimBase, PiGroupSet, ThermalMassConstraint
from similitude.nondim import (
    compute_pi_groups,
    dim_time,
    heat_rate_group,
    nondim_thermal_mass_temp,
    nondim_time,
    pi_residuals,
    time_scale_factor,
)
from similitude.peltier import peltier_power_setpoint, raw_power_setpoint, simulated_ambient
from similitude.sizing import design_pi_groups, design_state, fit_segment, scale_model, solve_lab_scale
from similitude.units import Q_, assert_dimensionless, audit_groups
from thermal.simulator import simulate

FULL_BASE = NondimBase(rho=971.0, mdot_I=20.0, T_s=80.0, D=0.1)
LAB_BASE = NondimBase(rho=994.0, mdot_I=0.0862, T_s=36.0, D=0.012)
POWER_RATIO = LAB_BASE.power_unit / FULL_BASE.power_unit


# --- Nondimensional Variable Tests ---
def test_time_round_trips_through_t_star():
    assert dim_time(nondim_time(3600.0, LAB_BASE), LAB_BASE) == pytest.approx(3600.0)


def test_equal_t_star_maps_full_hours_to_lab_hours():
    factor = time_scale_factor(FULL_BASE, LAB_BASE)
    assert 48.0 * factor == pytest.approx(19.70, abs=0.01)
    assert nondim_time(48 * 3600.0, FULL_BASE) == pytest.approx(nondim_time(48 * 3600.0 * factor, LAB_BASE))


def test_thermal_mass_temperature_is_relative_to_setpoint():
    assert nondim_thermal_mass_temp(30.0, 28.0, LAB_BASE) == pytest.approx(2.0 / 36.0)


def test_heat_rate_group_differs_between_scales():
    full = heat_rate_group(4197.0, FULL_BASE)
    lab = heat_rate_group(4178.0, LAB_BASE)
    assert full != pytest.approx(lab)


def test_pi_groups_at_design_point(small_model):
    flow, state = design_state(small_model)
    base = NondimBase.from_model(small_model)
    groups = compute_pi_groups(small_model, flow, state, base)
    assert groups.t_star == 0.0
    assert groups.T_p_star == pytest.approx(1.0)
    assert groups.T_ThM_star == 0.0
    tm = small_model.thermal_mass("ThM")
    expected_pi6 = tm.hAs_actual * (28.0 - 22.0) * base.rho ** 2 * base.D ** 4 / base.mdot_I ** 3
    assert groups.pi6 == pytest.approx(expected_pi6)


def test_strict_groups_use_local_flow(small_model):
    flow, state = design_state(small_model)
    base = NondimBase.from_model(small_model)
    groups = compute_pi_groups(small_model, flow, state, base, segment_id="B", strict=True)
    # The bypass carries nothing with the valve open.
    assert math.isinf(groups.pi3)


def test_pi_residuals_are_relative():
    groups = {"t_star": 0.0, "T_p_star": 1.0, "T_HX_star": 1.0, "T_ThM_star": 0.0,
                   "pi1": 2.0, "pi2": 0.1, "pi3": 5.0, "pi4": 1e6, "pi5": 3.0, "pi6": 3.0}
    reference = PiGroupSet(**groups)
    candidate = PiGroupSet(**{**groups, "pi4": 0.5e6, "T_ThM_star": 0.01})
    residuals = pi_residuals(reference, candidate)
    assert residuals["pi4"] == pytest.approx(0.5)
    assert residuals["T_ThM_star"] == pytest.approx(0.01)
    assert residuals["pi1"] == 0.0


# --- Unit Audit Tests ---
def test_every_group_is_dimensionless():
    assert_dimensionless()
    assert set(audit_groups().values()) == {"dimensionless"}


def test_loss_coefficient_needs_density_to_be_dimensionless():
    k = Q_(0.005, "m**3/kg")
    assert not k.dimensionless
    assert (k * Q_(971.0, "kg/m**3")).to_base_units().dimensionless


def test_audit_flag_runs_the_unit_check(small_model):
    flow, state = design_state(small_model)
    groups = compute_pi_groups(small_model, flow, state, NondimBase.from_model(small_model), audit=True)
    assert groups.pi1 > 0


# --- Peltier Law Tests ---
def test_simulated_ambient_inverts_the_heat_loss():
    T_a_sim = simulated_ambient(T_ThM=28.0, T_a_lab=22.0, Q_pelt=10.0, hAs_act=2.5, hAs_sim=2.5)
    assert 2.5 * (28.0 - T_a_sim) == pytest.approx(2.5 * (28.0 - 22.0) + 10.0)


def test_simulated_ambient_needs_positive_hAs():
    with pytest.raises(DomainError):
        simulated_ambient(28.0, 22.0, 0.0, 2.5, 0.0)


def test_power_law_weights_each_side_by_its_own_hAs(lab_model, lab_scenario):
    tm = lab_model.thermal_mass("ThM1")
    raw = raw_power_setpoint(lab_scenario, T_a_full=-5.0, T_a_lab=22.0, tm=tm, k_T=0.45)
    assert raw == pytest.approx(0.4 * (22.0 - 28.0) - 0.3 * 0.45 * (-5.0 - 20.0))


def test_power_setpoint_is_clamped(lab_model, lab_scenario, caplog):
    tm = lab_model.thermal_mass("ThM1")
    assert peltier_power_setpoint(lab_scenario, -1000.0, 22.0, tm, 0.45) == 50.0
    assert peltier_power_setpoint(lab_scenario, 40.0, 22.0, tm, 0.45) == 0.0
    assert "clamped" in caplog.text


# --- Sizing Tests ---
def test_identity_constraints_reproduce_the_model(full_model):
    solution = solve_lab_scale(full_model, LabConstraints(base=NondimBase.from_model(full_model)))
    assert solution.lab_model == full_model
    assert solution.feasible
    assert max(solution.residuals.values()) == pytest.approx(0.0, abs=1e-12)
    assert solution.time_scale_factor == pytest.approx(1.0)


def test_reference_sizing(full_model, lab_constraints):
    solution = solve_lab_scale(full_model, lab_constraints)
    lab = solution.lab_model
    assert solution.feasible
    assert solution.time_scale_factor == pytest.approx(0.41043, rel=1e-4)
    assert solution.temperature_ratio.k_T == pytest.approx(0.45)
    assert lab.plant.supply_temp_Ts == 36.0
    assert lab.plant.pump_pressure_rise == 75000.0
    for segment in lab.segments:
        assert 2.5 <= segment.length_l <= 11.0
        assert 0.23 <= segment.conductive_hAs <= 1.0
    assert lab.segment("S2").length_l == pytest.approx(7.2)
    assert lab.segment("S2").conductive_hAs == pytest.approx(50.0 * 0.011722, rel=1e-4)
    assert lab.segment("S1").diameter_D == pytest.approx(0.012)
    assert lab.segment("S1").loss_coeff_k_tot == pytest.approx(0.005 * 971.0 / 994.0)
    assert lab.heat_exchanger("HX2").convective_hAs_HX == pytest.approx(15.475, rel=1e-4)
    assert lab.thermal_mass("ThM1").heat_capacity_C == pytest.approx(50.4e3, rel=1e-3)
    assert lab.thermal_mass("ThM2").heat_capacity_C == 43500.0
    assert lab.thermal_mass("ThM1").setpoint_Tset == 26.0
    assert solution.value("ThM2", "power_setpoint_Qpelt") == pytest.approx(47.49, abs=0.01)
    assert math.isinf(lab.valve("V1").user_branch_k_range[1])


def test_long_segment_is_cut_to_the_longest_pipe_and_keeps_its_loss_group(full_model, lab_constraints):
    solution = solve_lab_scale(full_model, lab_constraints)
    s1 = solution.lab_model.segment("S1")
    assert s1.length_l == pytest.approx(11.0)
    assert s1.conductive_hAs == pytest.approx(90.0 * 0.011722 * 11.0 / 12.0, rel=1e-4)
    groups = design_pi_groups(full_model, FULL_BASE)["segment:S1"]
    lab_groups = design_pi_groups(solution.lab_model, LAB_BASE)["segment:S1"]
    residuals = pi_residuals(groups, lab_groups)
    assert residuals["pi1"] == pytest.approx(1.0 / 11.0, rel=1e-6)
    assert residuals["pi2"] == pytest.approx(0.0, abs=1e-9)
    assert any("segment S1" in note for note in solution.notes)


def test_fit_segment_balances_the_two_groups():
    # Ideal 2.4 m at 0.0586 W/K lies below both hardware ranges.
    length, hAs, worst = fit_segment(2.4, 0.0586, (2.5, 11.0), (0.23, 1.0))
    assert hAs == pytest.approx(0.23)
    volume_mismatch = 1.0 - 2.4 / length
    loss_mismatch = (0.23 / length) / (0.0586 / 2.4) - 1.0
    assert volume_mismatch == pytest.approx(loss_mismatch, rel=1e-4)
    assert worst == pytest.approx(volume_mismatch, rel=1e-4)


def test_fit_segment_keeps_feasible_values():
    assert fit_segment(7.2, 0.586, (2.5, 11.0), (0.23, 1.0)) == (7.2, 0.586, 0.0)
    assert fit_segment(12.0, 0.0, (2.5, 11.0), (0.23, 1.0)) == (11.0, 0.0, pytest.approx(1.0 / 11.0))


def test_minimax_lowers_the_worst_residual_below_clipping(full_model, lab_constraints):
    ideal = scale_model(full_model, LabConstraints(base=LAB_BASE, cp=4178.0, design_ambient=22.0,
                                                   defaults=lab_constraints.defaults,
                                                   thermal_masses=lab_constraints.thermal_masses))[0]
    fitted = solve_lab_scale(full_model, lab_constraints)
    clipped_worst = 0.0
    for segment in ideal.segments:
        length = float(np.clip(segment.length_l, *lab_constraints.segment_length_range))
        hAs = float(np.clip(segment.conductive_hAs, *lab_constraints.segment_hAs_range))
        volume_mismatch = abs(segment.length_l / length - 1.0)
        loss_mismatch = abs((hAs / length) / (segment.conductive_hAs / segment.length_l) - 1.0)
        clipped_worst = max(clipped_worst, volume_mismatch, loss_mismatch)
    fitted_worst = max(fitted.residuals["pi1"], fitted.residuals["pi2"])
    assert clipped_worst > 2.0
    assert fitted_worst < 0.7
    assert fitted_worst < clipped_worst


def test_fixed_heat_capacity_shows_up_as_a_residual(full_model, lab_constraints):
    solution = solve_lab_scale(full_model, lab_constraints)
    ideal = 7.0e9 * LAB_BASE.heat_capacity_unit / FULL_BASE.heat_capacity_unit
    assert solution.residuals["pi4"] == pytest.approx(1.0 - 43500.0 / ideal, rel=1e-6)
    assert solution.residuals["pi5"] == pytest.approx(0.0, abs=1e-9)
    assert solution.residuals["pi6"] == pytest.approx(0.0, abs=1e-9)
    assert solution.residuals["pi3"] == pytest.approx(0.0, abs=1e-9)


def test_sized_design_groups_match(full_model, lab_constraints):
    lab_model, required = scale_model(full_model, lab_constraints)
    full_groups = design_pi_groups(full_model, FULL_BASE)
    lab_groups = design_pi_groups(lab_model, LAB_BASE, required)
    residuals = pi_residuals(full_groups["segment:S2"], lab_groups["segment:S2"])
    assert residuals["pi1"] == pytest.approx(0.0, abs=1e-9)
    assert residuals["pi2"] == pytest.approx(0.0, abs=1e-9)


def test_underpowered_peltier_is_flagged(full_model, lab_constraints, caplog):
    weak = lab_constraints.model_copy(update={
        "defaults": lab_constraints.defaults.model_copy(update={"max_power": 30.0})})
    solution = solve_lab_scale(full_model, weak)
    assert not solution.feasible
    assert [flag.component for flag in solution.flags] == ["ThM2"]
    assert solution.flags[0].constraint == "Q_pelt <= max_power"
    assert solution.lab_model.thermal_mass("ThM2").peltier.power_setpoint_Qpelt == 30.0
    assert "Sizing constraint violated" in caplog.text


def test_setpoint_above_supply_is_flagged(full_model, lab_constraints):
    hot = lab_constraints.model_copy(update={"defaults": ThermalMassConstraint(setpoint_Tset=40.0, max_power=50.0)})
    solution = solve_lab_scale(full_model, hot)
    assert "T_set < T_s" in {flag.constraint for flag in solution.flags}


def test_free_setpoint_follows_k_T(full_model):
    constraints = LabConstraints(base=LAB_BASE, cp=4178.0, design_ambient=22.0)
    lab_model, _ = scale_model(full_model, constraints)
    assert lab_model.thermal_mass("ThM1").setpoint_Tset == pytest.approx(20.0 * 0.45)
    hx = full_model.heat_exchanger("HX1")
    assert lab_model.heat_exchanger("HX1").convective_hAs_HX == pytest.approx(
        hx.convective_hAs_HX * POWER_RATIO / 0.45)


def test_notes_report_the_time_discrepancy(full_model, lab_constraints):
    notes = " ".join(solve_lab_scale(full_model, lab_constraints).notes)
    assert "19.70 h" in notes
    assert "0.375" in notes


def test_full_scale_peltier_is_carried_into_the_sizing(full_model, lab_constraints):
    tm = full_model.thermal_mass("ThM1").model_copy(update={
        "hAs_simulated": 3000.0, "peltier": PeltierUnit(max_power=1e5, power_setpoint_Qpelt=1000.0)})
    model = full_model.model_copy(update={"thermal_masses": [tm, full_model.thermal_mass("ThM2")]})
    _, required = scale_model(model, lab_constraints)
    _, baseline = scale_model(full_model, lab_constraints)
    assert required["ThM1"] > baseline["ThM1"]




# --- Similitude Property Tests ---
def _random_loop(rng: np.random.Generator, flow_scale: float = 1.0, temperature_scale: float = 1.0):
    """One valve loop drawn at random, optionally stretched in time and in temperature.

    Multiplying every flow and every conductance by ``flow_scale`` speeds the network up
    by that factor without touching its nondimensional groups.
    """
    a, s = temperature_scale, flow_scale

    def draw(low, high):
        return float(rng.uniform(low, high))

    def pipe(ident, upstream, downstream, length):
        return PipeSegment(id=ident, length_l=length, diameter_D=0.012, loss_coeff_k_tot=draw(0.002, 0.03),
                           conductive_hAs=s * draw(0.1, 1.5), upstream_node=upstream, downstream_node=downstream)

    model = NetworkModel(
        fluid=FluidProperties(rho=994.0, cp=4178.0),
        plant=SupplyPlant(supply_temp_Ts=a * draw(30.0, 60.0), initial_mass_flow_mdotI=s * draw(0.02, 0.1),
                          pump_pressure_rise=1e8),
        segments=[
            pipe("S", "plant_out", "split", draw(2.0, 12.0)),
            pipe("B", "split", "merge", draw(1.0, 4.0)),
            pipe("R", "merge", "plant_in", draw(2.0, 12.0)),
        ],
        valves=[ValveModel(id="V", split_node="split", merge_node="merge",
                           user_branch_k_range=(0.002, math.inf), bypass_branch_k_range=(0.002, math.inf))],
        heat_exchangers=[HeatExchanger(id="HX", convective_hAs_HX=s * draw(5.0, 30.0),
                                       loss_coeff_k_HX=draw(0.01, 0.04), volume=draw(2e-4, 6e-4),
                                       upstream_node="split", downstream_node="merge", thermal_mass="ThM")],
        thermal_masses=[ThermalMass(id="ThM", heat_capacity_C=draw(1e4, 6e4), volume=0.007,
                                    hAs_actual=s * draw(0.3, 3.0), setpoint_Tset=a * 28.0)],
        design_ambient=a * 22.0,
        reference_diameter=0.012,
    )
    scenario = ExperimentScenario(
        duration=1800.0 / s,
        ambient_profile=Profile.constant(a * draw(0.0, 25.0)),
        initial_temperatures={"ThM": a * draw(15.0, 35.0)},
        output_interval=30.0 / s,
    )
    return model, scenario, {"V": draw(0.05, 1.0)}


@pytest.mark.parametrize("seed", range(20))
def test_networks_with_equal_groups_share_one_nondimensional_history(seed):
    twin_rng = np.random.default_rng(1000 + seed)
    flow_scale, temperature_scale = float(twin_rng.uniform(0.3, 3.0)), float(twin_rng.uniform(0.5, 2.0))
    model, scenario, positions = _random_loop(np.random.default_rng(seed))
    twin, twin_scenario, _ = _random_loop(np.random.default_rng(seed), flow_scale, temperature_scale)

    run = simulate(model, scenario, OpenLoopController(model, scenario, positions))
    twin_run = simulate(twin, twin_scenario, OpenLoopController(twin, twin_scenario, positions))
    report = compare_runs(run, twin_run, NondimBase.from_model(model), NondimBase.from_model(twin), model, twin)
    assert report.rms
    assert max(report.rms.values()) <= 1e-4


def test_t_star_is_linear_in_time():
    rng = np.random.default_rng(3)
    for t, u, c in rng.uniform(0.0, 1e5, size=(10, 3)):
        expected = nondim_time(t, LAB_BASE) + c * nondim_time(u, LAB_BASE)
        assert nondim_time(t + c * u, LAB_BASE) == pytest.approx(expected)
    assert nondim_time(0.0, LAB_BASE) == 0.0
