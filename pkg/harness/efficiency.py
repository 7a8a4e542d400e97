import logging
from enum import Enum
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

from control.occupancy import occupancy_setpoint
from models.metrics import PhaseEfficiency, PhasePartition
from models.network import NetworkModel
from models.scenario import ExperimentScenario, PhaseLabel
from models.simulation import SimulationTrajectory

logger = logging.getLogger("dhn_similitude")

# Integrated supply below this magnitude leaves a phase's efficiency undefined [J].
UNDEFINED_ENERGY = 1e-9


class MassMode(str, Enum):
    COOLING = "cooling"
    RECOVERING = "recovering"
    SETTLED = "settled"


def sample_weights(times: np.ndarray, duration: float) -> np.ndarray:
    """Time each sample stands for: up to the next sample, the last one up to ``duration``."""
    times = np.asarray(times, dtype=float)
    if len(times) == 0:
        return times
    ends = np.append(times[1:], max(duration, times[-1]))
    return ends - times


def _intervals(times: np.ndarray, selected: np.ndarray, duration: float) -> List[Tuple[float, float]]:
    intervals: List[Tuple[float, float]] = []
    ends = np.append(times[1:], max(duration, times[-1]))
    for start, end, chosen in zip(times, ends, selected):
        if not chosen or end <= start:
            continue
        if intervals and intervals[-1][1] == start:
            intervals[-1] = (intervals[-1][0], float(end))
        else:
            intervals.append((float(start), float(end)))
    return intervals


def mass_modes(trajectory: SimulationTrajectory, scenario: ExperimentScenario,
               tm_id: str, known_masses: List[str]) -> List[MassMode]:
    """Cooling outside occupancy; inside, settled once within the steady band for a full steady window."""
    times = trajectory.times.to_numpy()
    temperatures = trajectory.column(f"T_{tm_id}_C").to_numpy()
    windows = scenario.occupancy_windows.get(tm_id, [])
    modes: List[MassMode] = []
    band_since = None
    for t, T in zip(times, temperatures):
        window = next((w for w in windows if w.start <= t < w.end), None)
        if window is None:
            modes.append(MassMode.COOLING)
            band_since = None
            continue
        setpoint = occupancy_setpoint(scenario, tm_id, t, known_masses)
        if abs(T - setpoint) < scenario.steady_band:
            if band_since is None:
                band_since = t
        else:
            band_since = None
        settled = band_since is not None and t - max(band_since, window.start) >= scenario.steady_window
        modes.append(MassMode.SETTLED if settled else MassMode.RECOVERING)
    return modes


def partition_phases(trajectory: SimulationTrajectory, scenario: ExperimentScenario,
                     model: NetworkModel) -> PhasePartition:
    """Label the run as cooling, heating or steady_state; ``overall`` spans the whole run.

    Explicit ``phase_labels`` in the scenario take precedence over detection.
    """
    duration = scenario.duration
    intervals: Dict[PhaseLabel, List[Tuple[float, float]]] = {PhaseLabel.OVERALL: [(0.0, duration)]}
    if scenario.phase_labels:
        for phase in scenario.phase_labels:
            intervals.setdefault(phase.label, []).append((phase.start, min(phase.end, duration)))
        return PhasePartition(duration=duration, intervals=intervals)

    times = trajectory.times.to_numpy()
    known = [tm.id for tm in model.thermal_masses]
    if not known:
        return PhasePartition(duration=duration, intervals=intervals)

    modes = np.array([[mode.value for mode in mass_modes(trajectory, scenario, tm_id, known)] for tm_id in known], dtype=str)
    cooling = np.all(modes == MassMode.COOLING.value, axis=0)
    recovering = np.any(modes == MassMode.RECOVERING.value, axis=0)
    settled = np.any(modes == MassMode.SETTLED.value, axis=0)
    steady = ~recovering & settled
    heating = ~cooling & ~steady

    intervals[PhaseLabel.COOLING] = _intervals(times, cooling, duration)
    intervals[PhaseLabel.HEATING] = _intervals(times, heating, duration)
    intervals[PhaseLabel.STEADY_STATE] = _intervals(times, steady, duration)
    partition = PhasePartition(duration=duration, intervals=intervals)
    logger.info(
        "Phase partition: "
        + ", ".join(f"{label.value} {partition.total_time(label):.0f} s" for label in PhaseLabel))
    return partition


def efficiency_by_phase(losses: pd.DataFrame, partition: PhasePartition) -> Dict[str, PhaseEfficiency]:
    """Useful fraction ∫ΣQ_ThM / ∫Q_tot and lost fraction per phase."""
    times = losses["t_s"].to_numpy()
    weights = sample_weights(times, partition.duration)
    delivered = losses[[c for c in losses.columns if c.startswith("Q_ThM_")]].sum(axis=1).to_numpy()
    supplied = losses["Q_tot_W"].to_numpy()

    result: Dict[str, PhaseEfficiency] = {}
    for label in partition.intervals:
        mask = partition.mask(label, times)
        supplied_J = float(np.sum(weights[mask] * supplied[mask]))
        if abs(supplied_J) <= UNDEFINED_ENERGY:
            logger.warning(f"Phase {label.value}: no heat supplied, efficiency undefined")
            result[label.value] = PhaseEfficiency(supplied_J=supplied_J, defined=False)
            continue
        useful = float(np.sum(weights[mask] * delivered[mask])) / supplied_J
        result[label.value] = PhaseEfficiency(useful=useful, lost=1.0 - useful, supplied_J=supplied_J)
    return result


def energy_breakdown(trajectory: SimulationTrajectory, model: NetworkModel,
                     partition: PhasePartition) -> Dict[str, Dict[str, float]]:
    """Share of the heat lost to the environment by each pipe, the heater and each thermal mass.

    Thermal-mass losses include the heat pumped out by its Peltier unit. Components
    that gain heat from the environment over a phase count as zero.
    """
    frame = trajectory.frame
    times = frame["t_s"].to_numpy()
    weights = sample_weights(times, partition.duration)
    channels = {seg.id: f"Q_loss_{seg.id}_W" for seg in model.segments}
    channels["heater"] = "Q_heater_loss_W"
    channels.update({tm.id: f"Q_out_{tm.id}_W" for tm in model.thermal_masses})

    breakdown: Dict[str, Dict[str, float]] = {}
    for label in partition.intervals:
        mask = partition.mask(label, times)
        energies = {
            component: max(float(np.sum(weights[mask] * frame[column].to_numpy()[mask])), 0.0)
            for component, column in channels.items() if column in frame.columns
        }
        total = sum(energies.values())
        if total <= UNDEFINED_ENERGY:
            breakdown[label.value] = {component: 0.0 for component in energies}
            continue
        breakdown[label.value] = {component: energy / total for component, energy in energies.items()}
    return breakdown
