import logging
import math
from typing import Dict, Optional

import numpy as np
from scipy.signal import find_peaks

from control.occupancy import PeltierCommands
from models.control import Controls, PidConfig
from models.errors import InsufficientSignalError
from models.network import NetworkModel
from models.scenario import ExperimentScenario
from models.simulation import SimulationState
from network.topology import extract_layout
from thermal.simulator import simulate

logger = logging.getLogger("dhn_similitude")

RELAY_AMPLITUDE = 0.5
DITHER_FRACTION = 0.02
MIN_CYCLES = 2


class RelayController:
    """Bang-bang valve command around ``setpoint`` for one thermal mass; other loops stay open.

    The valve swings between fully closed and ``2 * amplitude`` open, so
    ``amplitude`` is the relay half-swing used by the describing-function gain.
    """

    def __init__(self, model: NetworkModel, scenario: ExperimentScenario, tm_id: str, setpoint: float,
                 sample_time: float, amplitude: float = RELAY_AMPLITUDE, hysteresis: float = 0.0):
        layout = extract_layout(model)
        self.valve_id = next(
            loop.valve_id for loop in layout.loops if model.heat_exchanger(loop.hx_id).thermal_mass == tm_id)
        self.others = {
            valve.id: float(scenario.valve_positions.get(valve.id, 1.0))
            for valve in model.valves if valve.id != self.valve_id
        }
        self.tm_id = tm_id
        self.setpoint = setpoint
        self.sample_time = sample_time
        self.amplitude = amplitude
        self.hysteresis = hysteresis
        self.peltier = PeltierCommands(model, scenario)
        self.heating = True

    def reset(self) -> None:
        self.heating = True

    def update(self, t: float, state: SimulationState) -> Controls:
        T = state.thermal_mass_temperatures[self.tm_id]
        if self.heating and T > self.setpoint + self.hysteresis:
            self.heating = False
        elif not self.heating and T < self.setpoint - self.hysteresis:
            self.heating = True
        position = 2.0 * self.amplitude if self.heating else 0.0
        positions = dict(self.others)
        positions[self.valve_id] = min(max(position, 0.0), 1.0)
        return Controls(
            valve_positions=positions,
            peltier_setpoints=self.peltier(t),
            setpoints={self.tm_id: self.setpoint},
        )


def ziegler_nichols(ultimate_gain: float, ultimate_period: float, base: PidConfig) -> PidConfig:
    """Classic PID rule: kp = 0.6 Ku, Ti = Pu/2, Td = Pu/8."""
    kp = 0.6 * ultimate_gain
    return base.model_copy(update={
        "kp": kp,
        "ki": kp / (ultimate_period / 2.0),
        "kd": kp * ultimate_period / 8.0,
    })


def relay_autotune(model: NetworkModel, scenario: ExperimentScenario, tm_id: str, seed: int,
                   setpoint: Optional[float] = None, base: Optional[PidConfig] = None) -> PidConfig:
    """Tune the PID of one thermal mass from a simulated relay-feedback experiment.

    The relay amplitude is dithered by a seeded fraction so repeated tunings with
    the same seed are identical. At least two full oscillations are required
    within the scenario duration.
    """
    base = base or (scenario.controller_config.for_mass(tm_id) if scenario.controller_config else PidConfig())
    tm = model.thermal_mass(tm_id)
    target = setpoint if setpoint is not None else tm.setpoint_Tset
    rng = np.random.default_rng(seed)
    amplitude = RELAY_AMPLITUDE * (1.0 - DITHER_FRACTION * rng.random())

    relay = RelayController(model, scenario, tm_id, target, base.sample_time, amplitude)
    trajectory = simulate(model, scenario, controller=relay)
    t = trajectory.times.to_numpy()
    T = trajectory.column(f"T_{tm_id}_C").to_numpy()

    span = float(np.ptp(T)) if len(T) else 0.0
    peaks, _ = find_peaks(T, prominence=0.05 * span if span > 0 else None)
    valleys, _ = find_peaks(-T, prominence=0.05 * span if span > 0 else None)
    if len(peaks) < MIN_CYCLES + 1 or len(valleys) < MIN_CYCLES:
        raise InsufficientSignalError(
            f"relay test on {tm_id} produced {len(peaks)} peaks and {len(valleys)} valleys; "
            f"extend the scenario duration")

    # Drop the first cycle, it carries the start-up transient.
    period = float(np.mean(np.diff(t[peaks[1:]])))
    half_swing = (float(np.mean(T[peaks[1:]])) - float(np.mean(T[valleys[1:]]))) / 2.0
    if period <= 0 or half_swing <= 0:
        raise InsufficientSignalError(f"relay test on {tm_id} did not oscillate")

    ultimate_gain = 4.0 * amplitude / (math.pi * half_swing)
    tuned = ziegler_nichols(ultimate_gain, period, base)
    logger.info(
        f"Relay autotune {tm_id}: Ku={ultimate_gain:.4g}, Pu={period:.4g} s -> "
        f"kp={tuned.kp:.4g}, ki={tuned.ki:.4g}, kd={tuned.kd:.4g}")
    return tuned


def autotune_all(model: NetworkModel, scenario: ExperimentScenario, seed: int) -> Dict[str, PidConfig]:
    return {tm.id: relay_autotune(model, scenario, tm.id, seed) for tm in model.thermal_masses}
