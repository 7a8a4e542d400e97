import logging
from typing import Dict, Iterable

import numpy as np

from models.errors import EmptyIntervalError, MissingChannelsError
from models.metrics import PhasePartition, QuantileStats
from models.scenario import PhaseLabel
from models.simulation import SimulationTrajectory

logger = logging.getLogger("dhn_similitude")


def quantile_stats(values) -> QuantileStats:
    """Population mean and STD with linear-interpolation quartiles."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise EmptyIntervalError("no samples in the requested interval")
    q25, median, q75 = np.percentile(values, [25.0, 50.0, 75.0])
    return QuantileStats(
        mean=float(np.mean(values)),
        std=float(np.std(values)),
        median=float(median),
        q25=float(q25),
        q75=float(q75),
    )


def trajectory_statistics(nondimensional: SimulationTrajectory, partition: PhasePartition,
                          thermal_masses: Iterable[str],
                          label: PhaseLabel = PhaseLabel.OVERALL) -> Dict[str, QuantileStats]:
    """Statistics of T_ThM* for each mass over one phase of a nondimensional trajectory."""
    frame = nondimensional.frame
    columns = {tm_id: f"T_{tm_id}_star" for tm_id in thermal_masses}
    missing = [column for column in columns.values() if column not in frame.columns]
    if missing:
        raise MissingChannelsError(missing)

    seconds = frame["t_s"] if "t_s" in frame.columns else frame["t_star"] * nondimensional.metadata.base.time_unit
    mask = partition.mask(label, seconds.to_numpy())
    if not mask.any():
        raise EmptyIntervalError(f"phase {label.value} contains no samples")
    return {tm_id: quantile_stats(frame[column].to_numpy()[mask]) for tm_id, column in columns.items()}


def mean_ratio(full: Dict[str, QuantileStats], lab: Dict[str, QuantileStats]) -> Dict[str, float]:
    """Full-scale over lab-scale mean of T_ThM* for masses present in both runs with a nonzero lab mean."""
    return {
        tm_id: full[tm_id].mean / lab[tm_id].mean
        for tm_id in sorted(full.keys() & lab.keys()) if lab[tm_id].mean != 0.0
    }
