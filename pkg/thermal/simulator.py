import logging
import math
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from configuration.loader import save_model, save_scenario
from control.occupancy import Controller, OpenLoopController
from control.peltier_tracking import PeltierTracker
from hydraulics.flow_solver import HydraulicNetwork, solve_flow_split
from models.control import Controls
from models.errors import (
    DhnError,
    DomainError,
    SimulationAbortedError,
    StepSizeError,
    ValidationFailedError,
)
from models.flow_state import FlowState
from models.metrics import EnergyAudit
from models.network import NetworkModel
from models.scenario import ExperimentScenario, Profile
from models.similitude import NondimBase
from models.simulation import RunMetadata, RunStatus, SimulationState, SimulationTrajectory
from network.validator import validate_network
from similitude.peltier import simulated_ambient
from thermal.assembly import LinearSystem, StateLayout, ThermalAssembly
from thermal.integrator import rk4_step
from utils.idempotency import RunKey

logger = logging.getLogger("dhn_similitude")

STABILITY_FACTOR = 0.5
DEFAULT_STEP_FACTOR = 0.1


def _signal(profile: Optional[Profile], default: float) -> Tuple[Callable[[float], float], bool]:
    """Fast evaluator of a piecewise-linear profile; the flag tells whether it is constant."""
    if profile is None:
        return (lambda t: default), True
    times = np.array([p[0] for p in profile.points], dtype=float)
    values = np.array([p[1] for p in profile.points], dtype=float)
    if np.all(values == values[0]):
        constant = float(values[0])
        return (lambda t: constant), True
    return (lambda t: float(np.interp(t, times, values))), False


def _check_step(dt: float, system: LinearSystem) -> None:
    bound = STABILITY_FACTOR * system.min_time_constant()
    if dt > bound:
        raise StepSizeError(dt, bound)


def plan_steps(scenario: ExperimentScenario, control_period: Optional[float],
               min_tau: float) -> Tuple[float, int, int]:
    """Step size and the number of steps per controller update and per output sample.

    dt divides the shorter of the two periods exactly; the longer one must be an
    integer multiple of the shorter.
    """
    output = scenario.output_interval
    control = control_period or output
    base = min(output, control)
    for period in (output, control):
        ratio = period / base
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise DomainError(
                f"controller sample time {control} s and output interval {output} s "
                "must be integer multiples of one another"
            )
    target = scenario.dt if scenario.dt is not None else DEFAULT_STEP_FACTOR * min_tau
    if target <= 0:
        raise DomainError(f"dt must be > 0, got {target}")
    if target > STABILITY_FACTOR * min_tau:
        raise StepSizeError(target, STABILITY_FACTOR * min_tau)
    substeps = max(1, math.ceil(base / target - 1e-9))
    dt = base / substeps
    return dt, substeps * round(control / base), substeps * round(output / base)


def design_time_constant(model: NetworkModel, assembly: ThermalAssembly,
                         network: Optional[HydraulicNetwork] = None) -> float:
    """Smallest volume time constant over fully open, half open and fully bypassed valves."""
    network = network or HydraulicNetwork(model)
    taus = []
    for position in (0.0, 0.5, 1.0):
        flow = solve_flow_split(model, {v.id: position for v in model.valves}, network)
        taus.append(assembly.build(flow, {}).min_time_constant())
    return min(taus)


def state_vector(layout: StateLayout, state: SimulationState) -> np.ndarray:
    x = np.zeros(layout.size)
    for seg_id, span in layout.pipe_slices.items():
        x[span] = state.pipe_temperatures[seg_id]
    for hx_id, i in layout.hx_index.items():
        x[i] = state.hx_temperatures[hx_id]
    for tm_id, i in layout.tm_index.items():
        x[i] = state.thermal_mass_temperatures[tm_id]
    return x


def state_from_vector(layout: StateLayout, x: np.ndarray, t: float, T_s: float, T_a: float,
                      flow_state: Optional[FlowState] = None,
                      peltier_powers: Optional[Dict[str, float]] = None) -> SimulationState:
    return SimulationState(
        t=t,
        pipe_temperatures={seg_id: [float(v) for v in x[span]] for seg_id, span in layout.pipe_slices.items()},
        hx_temperatures={hx_id: float(x[i]) for hx_id, i in layout.hx_index.items()},
        thermal_mass_temperatures={tm_id: float(x[i]) for tm_id, i in layout.tm_index.items()},
        ambient=T_a,
        supply_temperature=T_s,
        flow_state=flow_state,
        peltier_powers=dict(peltier_powers or {}),
    )


def initial_state(model: NetworkModel, scenario: ExperimentScenario) -> SimulationState:
    """Pipes and heat exchangers start at the supply temperature, masses at their set temperature."""
    T_s = scenario.supply_temperature(0.0, model.plant.supply_temp_Ts)
    N = scenario.subsegments
    return SimulationState(
        t=0.0,
        pipe_temperatures={seg.id: [T_s] * N for seg in model.segments},
        hx_temperatures={hx.id: T_s for hx in model.heat_exchangers},
        thermal_mass_temperatures={
            tm.id: scenario.initial_temperatures.get(tm.id, tm.setpoint_Tset) for tm in model.thermal_masses
        },
        ambient=scenario.ambient_profile.value(0.0),
        supply_temperature=T_s,
    )


def _with_flow(model: NetworkModel, mdot_I: Optional[float]) -> NetworkModel:
    if mdot_I is None or mdot_I == model.plant.initial_mass_flow_mdotI:
        return model
    plant = model.plant.model_copy(update={"initial_mass_flow_mdotI": mdot_I})
    return model.model_copy(update={"plant": plant})


def step_network(model: NetworkModel, state: SimulationState, controls: Controls, dt: float) -> SimulationState:
    """Advance every temperature by one RK4 step with flows frozen at the quasi-static solution."""
    if dt <= 0:
        raise DomainError(f"dt must be > 0, got {dt}")
    model = _with_flow(model, controls.mdot_I)
    subsegments = len(next(iter(state.pipe_temperatures.values())))
    assembly = ThermalAssembly(model, subsegments)
    flow = solve_flow_split(model, controls.valve_positions)
    powers = {
        tm.id: min(max(controls.peltier_setpoints.get(tm.id, 0.0), 0.0), tm.peltier.max_power)
        for tm in model.thermal_masses if tm.peltier is not None
    }
    system = assembly.build(flow, powers)
    _check_step(dt, system)

    T_s = controls.supply_temperature if controls.supply_temperature is not None else state.supply_temperature
    x = state_vector(assembly.layout, state)
    x_next = rk4_step(lambda t, v: system.derivative(v, T_s, state.ambient), state.t, x, dt)
    return state_from_vector(assembly.layout, x_next, state.t + dt, T_s, state.ambient, flow, powers)


class _Recorder:
    """Turns state vectors into trajectory rows with unit-suffixed columns."""

    def __init__(self, model: NetworkModel, scenario: ExperimentScenario, layout: StateLayout):
        self.model = model
        self.scenario = scenario
        self.layout = layout
        self.ambient_full, _ = (
            _signal(scenario.ambient_to_emulate, 0.0) if scenario.ambient_to_emulate is not None else (None, True)
        )
        self.rows: List[Dict[str, float]] = []

    def record(self, t: float, x: np.ndarray, system: LinearSystem, flow: FlowState,
               controls: Controls, peltier: Dict[str, float], T_s: float, T_a: float) -> None:
        model = self.model
        cp = model.fluid.cp
        row: Dict[str, float] = {"t_s": t}
        for seg in model.segments:
            row[f"T_{seg.id}_C"] = float(x[self.layout.pipe_slices[seg.id]].mean())
        for hx in model.heat_exchangers:
            row[f"T_{hx.id}_in_C"] = system.node_temperature(hx.upstream_node, x, T_s)
            row[f"T_{hx.id}_C"] = float(x[self.layout.hx_index[hx.id]])
        for tm in model.thermal_masses:
            row[f"T_{tm.id}_C"] = float(x[self.layout.tm_index[tm.id]])
        row["T_s_C"] = T_s
        row["T_r_C"] = system.node_temperature(model.plant.inlet_node, x, T_s)
        row["T_a_C"] = T_a
        if self.ambient_full is not None:
            row["T_a_full_C"] = self.ambient_full(t)

        row["mdot_I_kgps"] = flow.total_flow
        for edge, mdot in {**flow.segment_flows, **flow.hx_flows}.items():
            row[f"mdot_{edge}_kgps"] = mdot
        for edge, drop in {**flow.segment_pressure_drops, **flow.hx_pressure_drops}.items():
            row[f"dP_{edge}_Pa"] = drop
        row["dP_network_Pa"] = flow.network_pressure_drop
        for valve_id, u in flow.valve_positions.items():
            row[f"u_{valve_id}_frac"] = u

        for hx in model.heat_exchangers:
            tm = model.thermal_mass(hx.thermal_mass)
            T_tm = row[f"T_{tm.id}_C"]
            Q_pelt = peltier.get(tm.id, 0.0)
            row[f"Q_in_{tm.id}_W"] = hx.convective_hAs_HX * (row[f"T_{hx.id}_C"] - T_tm)
            row[f"Q_out_{tm.id}_W"] = tm.hAs_actual * (T_tm - T_a) + Q_pelt
            row[f"Q_pelt_{tm.id}_W"] = Q_pelt
            row[f"setpoint_{tm.id}_C"] = controls.setpoints.get(tm.id, tm.setpoint_Tset)
            if tm.peltier is not None and tm.effective_hAs_simulated > 0:
                row[f"T_a_sim_{tm.id}_C"] = simulated_ambient(
                    T_tm, T_a, Q_pelt, tm.hAs_actual, tm.effective_hAs_simulated
                )
        for seg in model.segments:
            row[f"Q_loss_{seg.id}_W"] = seg.conductive_hAs * (row[f"T_{seg.id}_C"] - T_a)
        row["Q_heater_loss_W"] = model.plant.heater_hAs * (T_s - T_a)
        row["Q_tot_W"] = flow.total_flow * cp * (T_s - row["T_r_C"])
        self.rows.append(row)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)


def run_metadata(model: NetworkModel, scenario: ExperimentScenario, dt: float,
                 status: RunStatus = RunStatus.COMPLETED, diagnostic: Optional[str] = None) -> RunMetadata:
    model_hash = RunKey.compute_hash(save_model(model))
    scenario_hash = RunKey.compute_hash(save_scenario(scenario))
    return RunMetadata(
        run_id=RunKey.run_id(model_hash, scenario_hash, dt),
        model_hash=model_hash,
        scenario_hash=scenario_hash,
        dt=dt,
        output_interval=scenario.output_interval,
        subsegments=scenario.subsegments,
        base=NondimBase.from_model(model),
        status=status,
        diagnostic=diagnostic,
        extra={"thermal_mass_setpoints": {tm.id: tm.setpoint_Tset for tm in model.thermal_masses}},
    )


def simulate(model: NetworkModel, scenario: ExperimentScenario,
             controller: Optional[Controller] = None) -> SimulationTrajectory:
    report = validate_network(model)
    if not report.valid:
        raise ValidationFailedError(report)

    network = HydraulicNetwork(model)
    assembly = ThermalAssembly(model, scenario.subsegments)
    layout = assembly.layout
    controller = controller or OpenLoopController(model, scenario)
    controller.reset()

    supply, supply_constant = _signal(scenario.supply_profile, model.plant.supply_temp_Ts)
    ambient, ambient_constant = _signal(scenario.ambient_profile, 20.0)
    recorder = _Recorder(model, scenario, layout)
    tracker = PeltierTracker({tm.id: tm.peltier for tm in model.thermal_masses if tm.peltier is not None})

    dt = scenario.dt or 0.0
    t = 0.0
    try:
        min_tau = design_time_constant(model, assembly, network)
        dt, steps_per_control, steps_per_output = plan_steps(scenario, controller.sample_time, min_tau)
        outputs = int(math.floor(scenario.duration / scenario.output_interval + 1e-9))
        total_steps = outputs * steps_per_output
        logger.info(
            f"Simulating {scenario.duration:.0f} s with dt={dt:.4g} s "
            f"({total_steps} steps, min time constant {min_tau:.4g} s)"
        )

        x = state_vector(layout, initial_state(model, scenario))
        flow: Optional[FlowState] = None
        for step in range(total_steps + 1):
            t = step * dt
            # A sample closes the control period that led up to it.
            if step > 0 and step % steps_per_output == 0:
                recorder.record(t, x, system, flow, controls, peltier, period_supply(t), ambient(t))
                if step == total_steps:
                    break
            if step % steps_per_control == 0:
                snapshot = state_from_vector(layout, x, t, supply(t), ambient(t), flow, tracker.applied)
                controls = controller.update(t, snapshot)
                peltier = tracker.step(controls.peltier_setpoints, steps_per_control * dt)
                flow = solve_flow_split(_with_flow(model, controls.mdot_I), controls.valve_positions, network)
                system = assembly.build(flow, peltier)
                _check_step(dt, system)
                if controls.supply_temperature is not None:
                    period_supply = lambda _t, value=controls.supply_temperature: value
                    period_supply_constant = True
                else:
                    period_supply, period_supply_constant = supply, supply_constant
                if period_supply_constant and ambient_constant:
                    forcing = system.b_s * period_supply(t) + system.b_a * ambient(t) + system.b_0
                    A = system.A
                    derivative = lambda _t, v, A=A, forcing=forcing: A @ v + forcing
                else:
                    derivative = lambda _t, v, system=system, T_s=period_supply: system.derivative(
                        v, T_s(_t), ambient(_t))
            if step == 0:
                recorder.record(t, x, system, flow, controls, peltier, period_supply(t), ambient(t))
                if total_steps == 0:
                    break
            x = rk4_step(derivative, t, x, dt)
            if not np.all(np.isfinite(x)):
                raise DomainError(f"non-finite temperature at t={t + dt:.3f} s")
    except DhnError as e:
        logger.error(f"Simulation aborted at t={t:.3f} s: {e}")
        partial = SimulationTrajectory(
            frame=recorder.frame(),
            metadata=run_metadata(model, scenario, dt, RunStatus.ABORTED, str(e)),
        )
        raise SimulationAbortedError(f"simulation aborted at t={t:.3f} s: {e}", partial) from e

    trajectory = SimulationTrajectory(frame=recorder.frame(), metadata=run_metadata(model, scenario, dt))
    logger.info(f"Simulation finished: {len(trajectory)} samples [run {trajectory.metadata.run_id}]")
    return trajectory


def energy_audit(trajectory: SimulationTrajectory, model: NetworkModel) -> EnergyAudit:
    """Integrated plant enthalpy against pipe losses, heat into the masses and stored enthalpy."""
    frame = trajectory.frame
    t = frame["t_s"].to_numpy()
    rho_cp = model.fluid.rho * model.fluid.cp
    if len(t) < 2:
        return EnergyAudit(supplied_J=0.0, pipe_losses_J=0.0, delivered_J=0.0, storage_change_J=0.0)

    supplied = trapezoid(frame["Q_tot_W"].to_numpy(), t)
    pipe_losses = sum(trapezoid(frame[f"Q_loss_{seg.id}_W"].to_numpy(), t) for seg in model.segments)
    delivered = sum(trapezoid(frame[f"Q_in_{tm.id}_W"].to_numpy(), t) for tm in model.thermal_masses)
    heater = trapezoid(frame["Q_heater_loss_W"].to_numpy(), t)

    def stored(i: int) -> float:
        energy = sum(rho_cp * seg.volume_V * frame[f"T_{seg.id}_C"].iloc[i] for seg in model.segments)
        energy += sum(rho_cp * hx.volume * frame[f"T_{hx.id}_C"].iloc[i] for hx in model.heat_exchangers)
        return float(energy)

    return EnergyAudit(
        supplied_J=float(supplied),
        pipe_losses_J=float(pipe_losses),
        delivered_J=float(delivered),
        storage_change_J=stored(-1) - stored(0),
        heater_loss_J=float(heater),
    )
