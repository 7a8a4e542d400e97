import logging
import math
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from models.errors import SpanMismatchError
from models.metrics import ComparisonReport
from models.network import NetworkModel
from models.similitude import NondimBase
from models.simulation import SimulationTrajectory
from similitude.nondim import pi_residuals
from similitude.sizing import design_pi_groups
from similitude.trajectory import nondimensionalize_trajectory

logger = logging.getLogger("dhn_similitude")

# A full/lab mean ratio of T_ThM* beyond this factor (either way) is flagged.
MEAN_RATIO_LIMIT = 2.0
PI_RESIDUAL_LIMIT = 1e-6


def _nondimensional(trajectory: SimulationTrajectory, base: NondimBase,
                    model: Optional[NetworkModel]) -> SimulationTrajectory:
    if trajectory.metadata.nondimensional:
        return trajectory
    return nondimensionalize_trajectory(trajectory, base, model)


def _design_residuals(full_model: NetworkModel, lab_model: NetworkModel,
                      full_base: NondimBase, lab_base: NondimBase) -> Dict[str, float]:
    def powers(model: NetworkModel) -> Dict[str, float]:
        return {tm.id: tm.peltier.power_setpoint_Qpelt for tm in model.thermal_masses if tm.peltier}

    full = design_pi_groups(full_model, full_base, powers(full_model))
    lab = design_pi_groups(lab_model, lab_base, powers(lab_model))
    worst: Dict[str, float] = {}
    for key in full.keys() & lab.keys():
        for group, value in pi_residuals(full[key], lab[key]).items():
            worst[group] = max(worst.get(group, 0.0), value)
    return worst


def compare_runs(full: SimulationTrajectory, lab: SimulationTrajectory,
                 full_base: NondimBase, lab_base: NondimBase,
                 full_model: Optional[NetworkModel] = None,
                 lab_model: Optional[NetworkModel] = None) -> ComparisonReport:
    """Overlay two runs on a shared t* grid and report their nondimensional differences.

    Only temperature channels (``T_*_star``) present in both runs are compared.
    The grid spans the overlap of both runs with the sample count of the sparser one.
    """
    full_nd = _nondimensional(full, full_base, full_model)
    lab_nd = _nondimensional(lab, lab_base, lab_model)
    t_full = full_nd.frame["t_star"].to_numpy()
    t_lab = lab_nd.frame["t_star"].to_numpy()
    if len(t_full) == 0 or len(t_lab) == 0:
        raise SpanMismatchError("cannot compare an empty trajectory")

    start, end = max(t_full[0], t_lab[0]), min(t_full[-1], t_lab[-1])
    if end < start or (end == start and (len(t_full) > 1 or len(t_lab) > 1)):
        raise SpanMismatchError(
            f"t* spans do not overlap: full [{t_full[0]:.6g}, {t_full[-1]:.6g}], "
            f"lab [{t_lab[0]:.6g}, {t_lab[-1]:.6g}]")

    in_full = int(np.sum((t_full >= start) & (t_full <= end)))
    in_lab = int(np.sum((t_lab >= start) & (t_lab <= end)))
    grid = np.linspace(start, end, max(min(in_full, in_lab), 2))

    channels = sorted(
        name for name in full_nd.frame.columns
        if name.startswith("T_") and name.endswith("_star") and name in lab_nd.frame.columns
    )
    rms: Dict[str, float] = {}
    max_abs: Dict[str, float] = {}
    ratios: Dict[str, float] = {}
    flags: List[str] = []
    for name in channels:
        a = np.interp(grid, t_full, full_nd.frame[name].to_numpy())
        b = np.interp(grid, t_lab, lab_nd.frame[name].to_numpy())
        difference = a - b
        rms[name] = float(np.sqrt(np.mean(difference ** 2)))
        max_abs[name] = float(np.max(np.abs(difference)))

    masses = full_model.thermal_masses if full_model is not None else []
    mass_ids = [tm.id for tm in masses] or list(full.metadata.extra.get("thermal_mass_setpoints", {}))
    for tm_id in mass_ids:
        name = f"T_{tm_id}_star"
        if name not in rms:
            continue
        lab_mean = float(np.mean(np.interp(grid, t_lab, lab_nd.frame[name].to_numpy())))
        full_mean = float(np.mean(np.interp(grid, t_full, full_nd.frame[name].to_numpy())))
        if lab_mean == 0.0:
            continue
        ratios[tm_id] = full_mean / lab_mean
        if ratios[tm_id] <= 0 or abs(math.log(ratios[tm_id])) > math.log(MEAN_RATIO_LIMIT):
            flags.append(f"{tm_id}: full/lab mean T_ThM* ratio {ratios[tm_id]:.3g} indicates unmatched heat capacity")

    residuals: Dict[str, float] = {}
    if full_model is not None and lab_model is not None:
        residuals = _design_residuals(full_model, lab_model, full_base, lab_base)
        for group, value in sorted(residuals.items()):
            if value > PI_RESIDUAL_LIMIT:
                flags.append(f"{group}: design residual {value:.3g}")

    for flag in flags:
        logger.warning(f"Run comparison: {flag}")
    return ComparisonReport(
        t_star_start=float(start),
        t_star_end=float(end),
        samples=len(grid),
        rms=rms,
        max_abs=max_abs,
        pi_residuals=residuals,
        mean_ratio=ratios,
        flags=flags,
    )


def overlay_frame(full: SimulationTrajectory, lab: SimulationTrajectory, report: ComparisonReport,
                  full_base: NondimBase, lab_base: NondimBase,
                  full_model: Optional[NetworkModel] = None,
                  lab_model: Optional[NetworkModel] = None) -> pd.DataFrame:
    """Both runs resampled on the report's t* grid, one ``full_``/``lab_`` column pair per channel."""
    full_nd = _nondimensional(full, full_base, full_model)
    lab_nd = _nondimensional(lab, lab_base, lab_model)
    grid = np.linspace(report.t_star_start, report.t_star_end, report.samples)
    columns = {"t_star": grid}
    for name in sorted(report.rms):
        columns[f"full_{name}"] = np.interp(grid, full_nd.frame["t_star"].to_numpy(), full_nd.frame[name].to_numpy())
        columns[f"lab_{name}"] = np.interp(grid, lab_nd.frame["t_star"].to_numpy(), lab_nd.frame[name].to_numpy())
    return pd.DataFrame(columns)
