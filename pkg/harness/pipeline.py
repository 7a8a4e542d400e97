import logging
from typing import Dict, Optional

import numpy as np

from harness.delay import peak_valley_delay
from harness.efficiency import efficiency_by_phase, energy_breakdown, partition_phases
from harness.losses import enthalpy_losses
from harness.statistics import mean_ratio, trajectory_statistics
from models.errors import DhnError
from models.metrics import MetricsReport, PhasePartition
from models.network import NetworkModel
from models.scenario import ExperimentScenario, PhaseLabel
from models.similitude import NondimBase
from models.simulation import SimulationTrajectory
from similitude.peltier import full_scale_setpoint
from similitude.trajectory import nondimensionalize_trajectory

logger = logging.getLogger("dhn_similitude")


def tracking_errors(trajectory: SimulationTrajectory, model: NetworkModel, scenario: ExperimentScenario,
                    partition: PhasePartition) -> Dict[str, float]:
    """RMS setpoint error in steady state [°C] and RMS emulated-ambient error relative to T_s."""
    frame = trajectory.frame
    times = frame["t_s"].to_numpy()
    errors: Dict[str, float] = {}
    steady = partition.mask(PhaseLabel.STEADY_STATE, times)
    for tm in model.thermal_masses:
        temperature, setpoint = f"T_{tm.id}_C", f"setpoint_{tm.id}_C"
        if steady.any() and temperature in frame and setpoint in frame:
            difference = (frame[temperature] - frame[setpoint]).to_numpy()[steady]
            errors[f"setpoint_{tm.id}"] = float(np.sqrt(np.mean(difference ** 2)))

        simulated = f"T_a_sim_{tm.id}_C"
        k_T = scenario.temperature_ratio_kT
        if simulated in frame and "T_a_full_C" in frame and k_T:
            T_set_full = full_scale_setpoint(scenario, tm, k_T)
            target = tm.setpoint_Tset - k_T * (T_set_full - frame["T_a_full_C"].to_numpy())
            difference = frame[simulated].to_numpy() - target
            errors[f"ambient_{tm.id}"] = float(np.sqrt(np.mean(difference ** 2))) / model.plant.supply_temp_Ts
    return errors


def build_metrics_report(trajectory: SimulationTrajectory, model: NetworkModel, scenario: ExperimentScenario,
                         reference: Optional[SimulationTrajectory] = None,
                         reference_base: Optional[NondimBase] = None,
                         reference_scenario: Optional[ExperimentScenario] = None,
                         reference_model: Optional[NetworkModel] = None) -> MetricsReport:
    """All post-run metrics of one trajectory; a reference run adds the full/lab mean ratio."""
    notes = []
    losses = enthalpy_losses(trajectory, model)
    partition = partition_phases(trajectory, scenario, model)
    efficiency = efficiency_by_phase(losses, partition)
    breakdown = energy_breakdown(trajectory, model, partition)

    base = trajectory.metadata.base
    delay = None
    try:
        delay = peak_valley_delay(trajectory.times, trajectory.column("T_s_C"), trajectory.column("T_r_C"), base)
    except DhnError as e:
        notes.append(f"delay not estimated: {e}")

    tm_ids = [tm.id for tm in model.thermal_masses]
    nondimensional = nondimensionalize_trajectory(trajectory, base, model)
    statistics = {}
    try:
        statistics = trajectory_statistics(nondimensional, partition, tm_ids)
    except DhnError as e:
        notes.append(f"statistics not computed: {e}")

    ratios: Dict[str, float] = {}
    if reference is not None:
        ref_model = reference_model or model
        ref_scenario = reference_scenario or scenario
        ref_nd = nondimensionalize_trajectory(reference, reference_base or reference.metadata.base, ref_model)
        ref_partition = partition_phases(reference, ref_scenario, ref_model)
        ref_stats = trajectory_statistics(ref_nd, ref_partition, tm_ids)
        ratios = mean_ratio(ref_stats, statistics)

    return MetricsReport(
        efficiency=efficiency,
        loss_breakdown=breakdown,
        delay=delay,
        rms_errors=tracking_errors(trajectory, model, scenario, partition),
        statistics=statistics,
        mean_ratio=ratios,
        notes=notes,
    )
