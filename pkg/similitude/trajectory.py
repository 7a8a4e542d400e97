import logging
import re
from typing import Dict, Optional

import numpy as np
import pandas as pd

from models.errors import BaseMismatchError, MissingChannelsError
from models.network import NetworkModel
from models.similitude import NondimBase
from models.simulation import SimulationTrajectory

logger = logging.getLogger("dhn_similitude")

BASE_TOLERANCE = 1e-9

_TEMPERATURE = re.compile(r"^(T_.+|setpoint_.+)_C$")
_POWER = re.compile(r"^(Q_.+)_W$")
_PRESSURE = re.compile(r"^(dP_.+)_Pa$")
_FLOW = re.compile(r"^(mdot_.+)_kgps$")


def _same_base(a: NondimBase, b: NondimBase) -> bool:
    return all(
        abs(getattr(a, name) - getattr(b, name)) <= BASE_TOLERANCE * abs(getattr(b, name))
        for name in ("rho", "mdot_I", "T_s", "D")
    )


def _mass_setpoints(trajectory: SimulationTrajectory, model: Optional[NetworkModel]) -> Dict[str, float]:
    if model is not None:
        return {tm.id: tm.setpoint_Tset for tm in model.thermal_masses}
    return dict(trajectory.metadata.extra.get("thermal_mass_setpoints", {}))


def nondimensionalize_trajectory(trajectory: SimulationTrajectory, base: NondimBase,
                                 model: Optional[NetworkModel] = None) -> SimulationTrajectory:
    """Rewrite a dimensional trajectory on the t*, T*, π axes.

    Thermal-mass temperatures become (T - T_set)/T_s, all other temperatures
    T/T_s. Heat rates divide by the power unit, pressure drops by the pressure
    unit and flows by ṁ_I. Columns end in ``_star``; ``t_s`` and valve positions
    pass through.
    """
    if trajectory.metadata.nondimensional:
        raise BaseMismatchError("trajectory is already nondimensional")
    if not _same_base(trajectory.metadata.base, base):
        raise BaseMismatchError(
            f"trajectory was recorded with base {trajectory.metadata.base.model_dump()}, "
            f"not {base.model_dump()}")

    frame = trajectory.frame
    setpoints = _mass_setpoints(trajectory, model)
    columns: Dict[str, pd.Series] = {"t_star": frame["t_s"] * base.mdot_I / (base.rho * base.D ** 3)}
    for name in frame.columns:
        if name == "t_s":
            columns[name] = frame[name]
            continue
        match = _TEMPERATURE.match(name)
        if match:
            stem = match.group(1)
            tm_id = stem[2:] if stem.startswith("T_") else None
            if tm_id in setpoints:
                columns[f"{stem}_star"] = (frame[name] - setpoints[tm_id]) / base.T_s
            else:
                columns[f"{stem}_star"] = frame[name] / base.T_s
            continue
        for pattern, unit in ((_POWER, base.power_unit), (_PRESSURE, base.pressure_unit), (_FLOW, base.mdot_I)):
            match = pattern.match(name)
            if match:
                columns[f"{match.group(1)}_star"] = frame[name] / unit
                break
        else:
            columns[name] = frame[name]

    metadata = trajectory.metadata.model_copy(update={"nondimensional": True})
    logger.debug(f"Nondimensionalized {len(frame)} samples into {len(columns)} columns")
    return SimulationTrajectory(frame=pd.DataFrame(columns), metadata=metadata)


def pipe_balance_residual(nondimensional: SimulationTrajectory, model: NetworkModel, base: NondimBase,
                          segment_id: str, inlet_column: str = "T_s_star") -> float:
    """RMS of dT_p*/dt* - [π1(T_in* - T_p*) - π2] along a single-volume segment.

    π2 is taken per sample with the recorded ambient; the derivative is a
    central finite difference, so the residual measures integration error.
    """
    frame = nondimensional.frame
    required = ["t_star", f"T_{segment_id}_star", inlet_column, "T_a_star", f"mdot_{segment_id}_star"]
    missing = [name for name in required if name not in frame.columns]
    if missing:
        raise MissingChannelsError(missing)

    segment = model.segment(segment_id)
    rho, cp, V, D = model.fluid.rho, model.fluid.cp, segment.volume_V, base.D
    t_star = frame["t_star"].to_numpy()
    T_p = frame[f"T_{segment_id}_star"].to_numpy()
    T_in = frame[inlet_column].to_numpy()
    T_a = frame["T_a_star"].to_numpy()
    mdot = frame[f"mdot_{segment_id}_star"].to_numpy() * base.mdot_I

    pi1 = (mdot / (rho * V)) * (D ** 3 * rho / base.mdot_I)
    # (T_p - T_a)·D³ρ/(ṁ_I T_s) with temperatures already divided by T_s
    pi2 = (segment.conductive_hAs / (rho * cp * V)) * (T_p - T_a) * (D ** 3 * rho / base.mdot_I)
    residual = np.gradient(T_p, t_star) - (pi1 * (T_in - T_p) - pi2)
    return float(np.sqrt(np.mean(residual[1:-1] ** 2))) if len(residual) > 2 else 0.0
