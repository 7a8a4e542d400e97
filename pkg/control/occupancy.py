import logging
from typing import Dict, Iterable, Optional, Protocol

from control.pid import pid_step
from models.control import Controls, PidConfig, PidState
from models.errors import UnknownThermalMassError
from models.network import NetworkModel
from models.scenario import ExperimentScenario
from models.simulation import SimulationState
from network.topology import extract_layout
from similitude.peltier import raw_power_setpoint

logger = logging.getLogger("dhn_similitude")

# Slack on sample-time comparisons [s].
SAMPLE_TOLERANCE = 1e-6


class Controller(Protocol):
    sample_time: Optional[float]

    def reset(self) -> None:
        ...

    def update(self, t: float, state: SimulationState) -> Controls:
        ...


def occupancy_setpoint(scenario: ExperimentScenario, tm_id: str, t: float,
                       known_masses: Optional[Iterable[str]] = None) -> float:
    """Heating setpoint inside an occupancy window [start, end), cooling setpoint outside."""
    if tm_id not in scenario.occupancy_windows:
        if known_masses is None or tm_id not in set(known_masses):
            raise UnknownThermalMassError(f"no schedule for thermal mass {tm_id!r}")
        return 0.0
    windows = sorted(scenario.occupancy_windows[tm_id], key=lambda w: w.start)
    if not windows:
        return 0.0
    cooling = windows[0].cooling_setpoint
    for window in windows:
        if window.start <= t < window.end:
            return window.heating_setpoint
        if window.end <= t:
            cooling = window.cooling_setpoint
    return cooling


class PeltierCommands:
    """Peltier power commands that make the lab masses emulate the full-scale ambient."""

    def __init__(self, model: NetworkModel, scenario: ExperimentScenario):
        self.model = model
        self.scenario = scenario
        self.masses = [tm for tm in model.thermal_masses if tm.peltier is not None]
        self.k_T = scenario.temperature_ratio_kT
        if self.masses and scenario.ambient_to_emulate is not None and self.k_T is None:
            logger.warning("ambient_to_emulate given without temperature_ratio_kT; Peltier units stay off")

    def __call__(self, t: float) -> Dict[str, float]:
        if self.scenario.ambient_to_emulate is None or self.k_T is None:
            return {}
        T_a_full = self.scenario.ambient_to_emulate.value(t)
        T_a_lab = self.scenario.ambient_profile.value(t)
        return {
            tm.id: raw_power_setpoint(self.scenario, T_a_full, T_a_lab, tm, self.k_T)
            for tm in self.masses
        }


class OccupancyController:
    """One PID per thermal mass driving its loop's bypass valve toward the occupancy setpoint."""

    def __init__(self, model: NetworkModel, scenario: ExperimentScenario,
                 pid_configs: Optional[Dict[str, PidConfig]] = None):
        self.model = model
        self.scenario = scenario
        controller = scenario.controller_config
        layout = extract_layout(model)
        # valve id -> thermal mass on that loop
        self.loops: Dict[str, str] = {
            loop.valve_id: model.heat_exchanger(loop.hx_id).thermal_mass for loop in layout.loops
        }
        self.configs: Dict[str, PidConfig] = {}
        for tm_id in self.loops.values():
            if pid_configs and tm_id in pid_configs:
                self.configs[tm_id] = pid_configs[tm_id]
            elif controller is not None:
                self.configs[tm_id] = controller.for_mass(tm_id)
            else:
                self.configs[tm_id] = PidConfig()
        self.sample_time = min((c.sample_time for c in self.configs.values()), default=None)
        self.peltier = PeltierCommands(model, scenario)
        self.states: Dict[str, PidState] = {}
        self.last_update: Dict[str, float] = {}
        self.reset()

    def reset(self) -> None:
        self.states = {tm_id: PidState() for tm_id in self.configs}
        self.last_update = {}

    def update(self, t: float, state: SimulationState) -> Controls:
        positions: Dict[str, float] = {}
        setpoints: Dict[str, float] = {}
        known = [tm.id for tm in self.model.thermal_masses]
        for valve_id, tm_id in self.loops.items():
            setpoint = occupancy_setpoint(self.scenario, tm_id, t, known)
            cfg = self.configs[tm_id]
            elapsed = t - self.last_update[tm_id] if tm_id in self.last_update else cfg.sample_time
            # Masses with a slower sample time hold their last command between their own updates.
            if elapsed < cfg.sample_time - SAMPLE_TOLERANCE:
                positions[valve_id] = self.states[tm_id].output
                setpoints[tm_id] = setpoint
                continue
            output, self.states[tm_id] = pid_step(
                cfg, self.states[tm_id], setpoint, state.thermal_mass_temperatures[tm_id], elapsed
            )
            self.last_update[tm_id] = t
            positions[valve_id] = output
            setpoints[tm_id] = setpoint
        return Controls(valve_positions=positions, peltier_setpoints=self.peltier(t), setpoints=setpoints)


class OpenLoopController:
    """Fixed valve positions; Peltier units still emulate the full-scale ambient."""

    def __init__(self, model: NetworkModel, scenario: ExperimentScenario,
                 valve_positions: Optional[Dict[str, float]] = None,
                 sample_time: Optional[float] = None):
        positions = valve_positions if valve_positions is not None else scenario.valve_positions
        self.positions = {valve.id: float(positions.get(valve.id, 1.0)) for valve in model.valves}
        self.setpoints = {tm.id: tm.setpoint_Tset for tm in model.thermal_masses}
        self.sample_time = sample_time
        self.peltier = PeltierCommands(model, scenario)

    def reset(self) -> None:
        pass

    def update(self, t: float, state: SimulationState) -> Controls:
        return Controls(
            valve_positions=dict(self.positions),
            peltier_setpoints=self.peltier(t),
            setpoints=dict(self.setpoints),
        )
